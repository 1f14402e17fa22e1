use evtgan::gev::{fit_gev_mle, gev_cdf, gev_neg_log_likelihood, gev_quantile, return_level, GevParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cdf_oracle(z: f64, mu: f64, sigma: f64, xi: f64) -> f64 {
    let s = (z - mu) / sigma;
    if xi == 0.0 {
        return (-(-s).exp()).exp();
    }
    let t = 1.0 + xi * s;
    if t <= 0.0 {
        return if xi > 0.0 { 0.0 } else { 1.0 };
    }
    (-t.powf(-1.0 / xi)).exp()
}

fn quantile_oracle(u: f64, mu: f64, sigma: f64, xi: f64) -> f64 {
    let t = -u.ln();
    if xi == 0.0 {
        mu - sigma * t.ln()
    } else {
        mu + sigma * (t.powf(-xi) - 1.0) / xi
    }
}

/// Central difference of the oracle distribution function.
fn density_oracle(z: f64, mu: f64, sigma: f64, xi: f64) -> f64 {
    let h = 1e-5 * sigma;
    (cdf_oracle(z + h, mu, sigma, xi) - cdf_oracle(z - h, mu, sigma, xi)) / (2.0 * h)
}

proptest! {
    #[test]
    fn cdf_and_quantile_agree_with_closed_form(
        mu in -20.0..20.0f64,
        sigma in 0.1..10.0f64,
        xi in -0.6..0.6f64,
        u in 0.001..0.999f64,
    ) {
        let p = GevParams::new(mu, sigma, xi).unwrap();
        let z = gev_quantile(u, &p).unwrap();
        let expected = quantile_oracle(u, mu, sigma, xi);
        prop_assert!((z - expected).abs() < 1e-8 * (1.0 + expected.abs()));
        prop_assert!((gev_cdf(z, &p) - u).abs() < 1e-10);
        prop_assert!((gev_cdf(z, &p) - cdf_oracle(z, mu, sigma, xi)).abs() < 1e-12);
    }

    #[test]
    fn cdf_is_monotone(mu in -5.0..5.0f64, sigma in 0.5..3.0f64, xi in -0.5..0.5f64, a in -10.0..10.0f64, d in 0.0..5.0f64) {
        let p = GevParams::new(mu, sigma, xi).unwrap();
        prop_assert!(gev_cdf(a, &p) <= gev_cdf(a + d, &p));
    }
}

#[test]
fn negative_log_likelihood_matches_numerical_density() {
    for &(mu, sigma, xi) in &[(10.0, 2.0, -0.2), (0.0, 1.0, 0.0), (3.0, 0.5, 0.3)] {
        let p = GevParams::new(mu, sigma, xi).unwrap();
        let data: Vec<f64> = [0.1, 0.35, 0.5, 0.8, 0.97].iter().map(|&u| quantile_oracle(u, mu, sigma, xi)).collect();
        let expected: f64 = -data.iter().map(|&z| density_oracle(z, mu, sigma, xi).ln()).sum::<f64>();
        let got = gev_neg_log_likelihood(&data, &p).unwrap();
        assert!((got - expected).abs() < 1e-5, "{got} vs {expected}");
    }
}

#[test]
fn return_level_is_the_upper_quantile() {
    let p = GevParams::new(10.0, 2.0, 0.1).unwrap();
    let z = return_level(100.0, &p).unwrap();
    assert!((cdf_oracle(z, 10.0, 2.0, 0.1) - 0.99).abs() < 1e-12);
}

#[test]
fn support_endpoints_bound_the_cdf() {
    let p = GevParams::new(0.0, 1.0, -0.5).unwrap();
    let (_, upper) = p.support();
    assert!((upper - 2.0).abs() < 1e-12);
    assert_eq!(gev_cdf(upper + 1.0, &p), 1.0);
    assert!(gev_neg_log_likelihood(&[3.0], &p).unwrap() >= 1e10);
}

#[test]
fn fit_recovers_parameters_from_oracle_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let data: Vec<f64> = (0..4000).map(|_| quantile_oracle(rng.gen_range(1e-12..1.0), 5.0, 1.5, 0.1)).collect();
    let fit = fit_gev_mle(&data).unwrap();
    assert!(fit.converged);
    let p = fit.params;
    assert!((p.mu() - 5.0).abs() < 0.1 && (p.sigma() - 1.5).abs() < 0.1 && (p.xi() - 0.1).abs() < 0.05, "{p:?}");
    // the fitted optimum beats the truth on the same data
    let truth = GevParams::new(5.0, 1.5, 0.1).unwrap();
    assert!(fit.nll <= gev_neg_log_likelihood(&data, &truth).unwrap() + 1e-9);
}

#[test]
fn fit_is_equivariant_under_location_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data: Vec<f64> = (0..500).map(|_| quantile_oracle(rng.gen_range(1e-12..1.0), 0.0, 1.0, 0.15)).collect();
    let shifted: Vec<f64> = data.iter().map(|z| 7.0 + 3.0 * z).collect();
    let a = fit_gev_mle(&data).unwrap().params;
    let b = fit_gev_mle(&shifted).unwrap().params;
    assert!((b.mu() - (7.0 + 3.0 * a.mu())).abs() < 1e-3);
    assert!((b.sigma() - 3.0 * a.sigma()).abs() < 1e-3);
    assert!((b.xi() - a.xi()).abs() < 1e-3);
}
