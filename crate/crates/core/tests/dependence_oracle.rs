use evtgan::brown_resnick::{
    br_chi, br_spectral_density, hr_bivariate_cdf, hr_bivariate_sample, hr_exponent,
};
use evtgan::dependence::{chi_empirical, rank_transform, spectral_empirical};
use proptest::prelude::*;

fn normal_cdf_oracle(x: f64) -> f64 {
    let n = 4000;
    let b = x.abs();
    let h = b / n as f64;
    let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = phi(0.0) + phi(b);
    for k in 1..n {
        s += phi(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 + x.signum() * s * h / 3.0
}

fn exponent_oracle(x: f64, y: f64, lambda: f64) -> f64 {
    let a = lambda.sqrt();
    normal_cdf_oracle(a / 2.0 + (y / x).ln() / a) / x + normal_cdf_oracle(a / 2.0 + (x / y).ln() / a) / y
}

/// Exact `P(V > q | U > q)` for a copula with `C(q, q) = q^theta`.
fn finite_q_chi(q: f64, chi: f64) -> f64 {
    (1.0 - 2.0 * q + q.powf(2.0 - chi)) / (1.0 - q)
}

#[test]
fn rank_transform_uses_midranks() {
    let u = rank_transform(&[3.0, 1.0, 3.0, 2.0]).unwrap();
    assert_eq!(u, vec![3.5 / 5.0, 1.0 / 5.0, 3.5 / 5.0, 2.0 / 5.0]);
}

proptest! {
    #[test]
    fn chi_is_invariant_under_monotone_margins(xs in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 40..200)) {
        let (a, b): (Vec<f64>, Vec<f64>) = xs.into_iter().unzip();
        let u = rank_transform(&a).unwrap();
        let v = rank_transform(&b).unwrap();
        let u2 = rank_transform(&a.iter().map(|x| x.exp()).collect::<Vec<_>>()).unwrap();
        let v2 = rank_transform(&b.iter().map(|x| 3.0 * x + 1.0).collect::<Vec<_>>()).unwrap();
        prop_assert_eq!(chi_empirical(&u, &v, 0.8).ok(), chi_empirical(&u2, &v2, 0.8).ok());
    }

    #[test]
    fn hr_exponent_matches_closed_form(x in 0.05..20.0f64, y in 0.05..20.0f64, lambda in 0.05..10.0f64) {
        let e = exponent_oracle(x, y, lambda);
        prop_assert!((hr_exponent(x, y, lambda) - e).abs() < 1e-9 * e);
    }
}

#[test]
fn br_chi_matches_normal_tail() {
    for &lambda in &[0.1f64, 1.0, 4.0, 9.0] {
        let expected = 2.0 * (1.0 - normal_cdf_oracle(lambda.sqrt() / 2.0));
        assert!((br_chi(lambda).unwrap() - expected).abs() < 1e-12);
    }
}

#[test]
fn hr_copula_diagonal_follows_extremal_coefficient() {
    let lambda = 2.0;
    let theta = 2.0 - br_chi(lambda).unwrap();
    for &q in &[0.2, 0.5, 0.9, 0.99] {
        assert!((hr_bivariate_cdf(q, q, lambda).unwrap() - q.powf(theta)).abs() < 1e-12);
    }
}

#[test]
fn sampled_chi_matches_exact_finite_threshold_value() {
    let lambda = 4.0;
    let q = 0.95;
    let (u, v): (Vec<f64>, Vec<f64>) = hr_bivariate_sample(lambda, 100_000, 5).unwrap().into_iter().unzip();
    let est = chi_empirical(&u, &v, q).unwrap();
    let exact = finite_q_chi(q, br_chi(lambda).unwrap());
    let se = (est * (1.0 - est) / (0.05 * 100_000.0)).sqrt();
    assert!((est - exact).abs() < 3.0 * se, "{est} vs {exact}");
}

#[test]
fn spectral_density_is_proportional_to_mixed_partial_of_exponent() {
    let lambda = 1.5;
    let h = 1e-4;
    let mixed = |w: f64| {
        let (x, y) = (w, 1.0 - w);
        let v = |dx: f64, dy: f64| exponent_oracle(x + dx, y + dy, lambda);
        -(v(h, h) - v(h, -h) - v(-h, h) + v(-h, -h)) / (4.0 * h * h)
    };
    let ratios: Vec<f64> = [0.2, 0.35, 0.5, 0.6, 0.8]
        .iter()
        .map(|&w| br_spectral_density(w, lambda).unwrap() / mixed(w))
        .collect();
    for r in &ratios {
        assert!((r / ratios[0] - 1.0).abs() < 1e-4, "{ratios:?}");
    }
    // unit mass and symmetry
    let n = 20_000;
    let mass: f64 = (0..n).map(|k| br_spectral_density((k as f64 + 0.5) / n as f64, lambda).unwrap()).sum::<f64>() / n as f64;
    assert!((mass - 1.0).abs() < 1e-4, "{mass}");
    let a = br_spectral_density(0.3, lambda).unwrap();
    assert!((a - br_spectral_density(0.7, lambda).unwrap()).abs() < 1e-12);
}

#[test]
fn spectral_angles_reflect_under_swap() {
    let (u, v): (Vec<f64>, Vec<f64>) = hr_bivariate_sample(1.0, 2000, 8).unwrap().into_iter().unzip();
    let mut a = spectral_empirical(&u, &v, 0.9).unwrap().angles;
    let mut b: Vec<f64> = spectral_empirical(&v, &u, 0.9).unwrap().angles.iter().map(|w| 1.0 - w).collect();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    assert_eq!(a.len(), b.len());
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
}
