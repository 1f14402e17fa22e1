//! Brown–Resnick baseline: fractal variograms, the Hüsler–Reiss bivariate
//! copula (evaluation, conditional sampling, spectral density) and a
//! least-squares fit of the variogram to empirical extremal correlations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dependence::{ChiMatrix, Site};
use crate::error::{domain, Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::special::{normal_cdf, normal_pdf};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariogramParams {
    alpha: f64,
    s: f64,
}

impl VariogramParams {
    pub fn new(alpha: f64, s: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::Parameter(format!("variogram alpha {alpha} not in (0,2]")));
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Parameter(format!("variogram scale {s} must be > 0")));
        }
        Ok(Self { alpha, s })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn s(&self) -> f64 {
        self.s
    }
}

/// `h^alpha / s`.
pub fn fractal_variogram(h: f64, p: &VariogramParams) -> Result<f64> {
    if !(h >= 0.0) {
        return domain(format!("distance {h} must be >= 0"));
    }
    Ok(h.powf(p.alpha) / p.s)
}

/// Extremal correlation `2 - 2 Phi(sqrt(lambda) / 2)` of the Hüsler–Reiss law.
pub fn br_chi(lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return domain(format!("lambda {lambda} must be >= 0"));
    }
    // 2 - 2 Phi(t) = erfc(t / sqrt 2), accurate far into the tail
    Ok(libm::erfc(lambda.sqrt() / 2.0 * std::f64::consts::FRAC_1_SQRT_2))
}

/// Model χ between two sites at distance `h`.
pub fn br_chi_at(h: f64, p: &VariogramParams) -> Result<f64> {
    br_chi(fractal_variogram(h, p)?)
}

/// Site coordinates in grid-cell units, row-major over an `H x W` grid;
/// site `(row, col)` sits at `(x, y) = (col, row)` by default.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteGeometry {
    height: usize,
    width: usize,
    coords: Vec<(f64, f64)>,
}

impl SiteGeometry {
    pub fn grid(height: usize, width: usize) -> Self {
        let coords = (0..height * width)
            .map(|k| ((k % width) as f64, (k / width) as f64))
            .collect();
        Self {
            height,
            width,
            coords,
        }
    }

    pub fn with_coords(height: usize, width: usize, coords: Vec<(f64, f64)>) -> Result<Self> {
        if coords.len() != height * width {
            return Err(Error::Shape(format!(
                "{} coordinates for a {height}x{width} grid",
                coords.len()
            )));
        }
        Ok(Self {
            height,
            width,
            coords,
        })
    }

    pub fn distance(&self, a: Site, b: Site) -> Result<f64> {
        let idx = |s: Site| -> Result<usize> {
            if s.0 >= self.height || s.1 >= self.width {
                return domain(format!("site {s:?} outside {}x{} grid", self.height, self.width));
            }
            Ok(s.0 * self.width + s.1)
        };
        let (p, q) = (self.coords[idx(a)?], self.coords[idx(b)?]);
        Ok(((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrFit {
    pub params: VariogramParams,
    /// Sum of squared χ residuals at `params`.
    pub objective: f64,
    /// Pairs skipped because their empirical χ was undefined.
    pub skipped: usize,
    pub converged: bool,
}

/// Sum of squared differences between model and empirical χ over `(distance, chi)`.
pub fn br_objective(points: &[(f64, f64)], p: &VariogramParams) -> f64 {
    points
        .iter()
        .map(|&(h, chi)| {
            let model = br_chi(h.powf(p.alpha) / p.s).unwrap_or(f64::NAN);
            (model - chi).powi(2)
        })
        .sum()
}

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

const ALPHA_GRID: usize = 20;
const S_GRID: usize = 41;
const LOG10_S_RANGE: (f64, f64) = (-3.0, 5.0);

/// Least-squares fit of `(alpha, s)` to empirical χ: a grid over
/// `alpha in {0.1, ..., 2.0}` times a log-grid in `s`, refined by Nelder–Mead
/// on `(logit(alpha/2), ln s)`.
pub fn fit_br(chi: &ChiMatrix, geom: &SiteGeometry) -> Result<BrFit> {
    let mut points = Vec::new();
    for (pair, c) in chi.pairs.iter().zip(&chi.chi) {
        let h = geom.distance(pair.0, pair.1)?;
        if let Some(c) = c {
            points.push((h, *c));
        }
    }
    let skipped = chi.undefined_count();
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).filter(|h| *h > 0.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    if points.len() < 2 || distinct.len() < 2 {
        return Err(Error::Underdetermined(format!(
            "{} usable pairs over {} distinct positive distances; need 2 of each",
            points.len(),
            distinct.len()
        )));
    }

    let mut best = (f64::INFINITY, 1.0, 1.0);
    for i in 1..=ALPHA_GRID {
        let alpha = 0.1 * i as f64;
        for j in 0..S_GRID {
            let t = j as f64 / (S_GRID - 1) as f64;
            let s = 10f64.powf(LOG10_S_RANGE.0 + t * (LOG10_S_RANGE.1 - LOG10_S_RANGE.0));
            let f = br_objective(&points, &VariogramParams { alpha, s });
            if f < best.0 {
                best = (f, alpha, s);
            }
        }
    }
    // keep the start strictly inside (0, 2) so the logit is finite
    let a0 = best.1.min(1.98);
    let x0 = [(a0 / (2.0 - a0)).ln(), best.2.ln()];
    let objective = |x: &[f64]| {
        let alpha = 2.0 * logistic(x[0]);
        let s = x[1].exp();
        if !(alpha > 0.0) || !(s > 0.0) || !s.is_finite() {
            return f64::INFINITY;
        }
        br_objective(&points, &VariogramParams { alpha, s })
    };
    let opts = NelderMeadOptions {
        max_iter: 2000,
        tol: 1e-12,
    };
    let m = nelder_mead(objective, &x0, &[0.5, 0.5], &opts);
    let (alpha, s, f) = if m.f <= best.0 {
        (2.0 * logistic(m.x[0]), m.x[1].exp(), m.f)
    } else {
        (best.1, best.2, best.0)
    };
    Ok(BrFit {
        params: VariogramParams::new(alpha.clamp(f64::MIN_POSITIVE, 2.0), s)?,
        objective: f,
        skipped,
        converged: m.converged,
    })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return domain(format!("lambda {lambda} must be finite and > 0"));
    }
    Ok(())
}

fn check_unit(x: f64, name: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return domain(format!("{name} = {x} not in [0,1]"));
    }
    Ok(())
}

/// Hüsler–Reiss exponent function on the unit-Fréchet scale.
pub fn hr_exponent(x: f64, y: f64, lambda: f64) -> f64 {
    let a = lambda.sqrt();
    let r = (y / x).ln() / a;
    normal_cdf(a / 2.0 + r) / x + normal_cdf(a / 2.0 - r) / y
}

/// Hüsler–Reiss copula `C(u, v) = exp(-V(-1/ln u, -1/ln v))`.
pub fn hr_bivariate_cdf(u: f64, v: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    check_unit(u, "u")?;
    check_unit(v, "v")?;
    if u == 0.0 || v == 0.0 {
        return Ok(0.0);
    }
    if u == 1.0 {
        return Ok(v);
    }
    if v == 1.0 {
        return Ok(u);
    }
    let x = -1.0 / u.ln();
    let y = -1.0 / v.ln();
    Ok((-hr_exponent(x, y, lambda)).exp())
}

/// `dC/du (u, v)`: the distribution function of `V` given `U = u`.
pub fn hr_conditional_cdf(u: f64, v: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(u > 0.0 && u < 1.0) {
        return domain(format!("conditioning value {u} not in (0,1)"));
    }
    check_unit(v, "v")?;
    if v == 0.0 {
        return Ok(0.0);
    }
    if v == 1.0 {
        return Ok(1.0);
    }
    let x = -1.0 / u.ln();
    let y = -1.0 / v.ln();
    let a = lambda.sqrt();
    let c = (-hr_exponent(x, y, lambda)).exp();
    Ok(c * normal_cdf(a / 2.0 + (y / x).ln() / a) / u)
}

/// Bisection tolerance on `v` for conditional sampling.
pub const SAMPLE_TOL: f64 = 1e-10;
const MAX_BISECTIONS: usize = 200;

fn invert_conditional(u: f64, p: f64, lambda: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut steps = 0;
    while hi - lo > SAMPLE_TOL {
        if steps == MAX_BISECTIONS {
            return Err(Error::Internal(format!(
                "bisection did not converge for u={u}, p={p}, lambda={lambda}"
            )));
        }
        let mid = 0.5 * (lo + hi);
        if hr_conditional_cdf(u, mid, lambda)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    Ok(0.5 * (lo + hi))
}

fn open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let x: f64 = rng.gen();
        if x > 0.0 {
            return x;
        }
    }
}

/// `n` pairs from the Hüsler–Reiss copula: `u` uniform, `v` by inverting the
/// conditional distribution at an independent uniform level.
pub fn hr_bivariate_sample(lambda: f64, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    hr_sample_with(lambda, n, &mut rng)
}

pub fn hr_sample_with(lambda: f64, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<(f64, f64)>> {
    check_lambda(lambda)?;
    if n == 0 {
        return domain("sample size must be >= 1");
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u = open_uniform(rng);
        let p = open_uniform(rng);
        let v = invert_conditional(u, p, lambda)?;
        // v is a bisection midpoint, hence strictly inside (0,1)
        out.push((u, v));
    }
    Ok(out)
}

/// Density of the angle `w = x/(x+y)` of the Hüsler–Reiss spectral
/// distribution, normalised to a probability density on (0,1).
pub fn br_spectral_density(w: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(w > 0.0 && w < 1.0) {
        return domain(format!("angle {w} not in (0,1)"));
    }
    let a = lambda.sqrt();
    let t = ((1.0 - w) / w).ln();
    Ok(normal_pdf(a / 2.0 + t / a) / (2.0 * a * w * w * (1.0 - w)))
}
