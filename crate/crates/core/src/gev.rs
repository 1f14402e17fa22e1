//! Generalized extreme value distribution: evaluation, inversion, maximum
//! likelihood fitting and return levels.
//!
//! `G(z) = exp(-(1 + xi (z - mu) / sigma)_+^(-1/xi))`, with the Gumbel limit
//! `exp(-exp(-(z - mu) / sigma))` used whenever `|xi| < GUMBEL_SWITCH`.

use crate::error::{domain, Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};

pub const GUMBEL_SWITCH: f64 = 1e-7;

/// Base value of the negative log-likelihood for parameters under which some
/// observation has zero density.
pub const OUT_OF_SUPPORT_PENALTY: f64 = 1e10;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GevParams {
    mu: f64,
    sigma: f64,
    xi: f64,
}

impl GevParams {
    pub fn new(mu: f64, sigma: f64, xi: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Parameter(format!("GEV scale must be > 0, got {sigma}")));
        }
        if !mu.is_finite() || !xi.is_finite() {
            return Err(Error::Parameter(format!("non-finite GEV parameters ({mu}, {xi})")));
        }
        Ok(Self { mu, sigma, xi })
    }

    pub fn gumbel(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(mu, sigma, 0.0)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    fn is_gumbel(&self) -> bool {
        self.xi.abs() < GUMBEL_SWITCH
    }

    /// `(lower, upper)` endpoints of the support; infinite where unbounded.
    pub fn support(&self) -> (f64, f64) {
        if self.is_gumbel() {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else if self.xi > 0.0 {
            (self.mu - self.sigma / self.xi, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, self.mu - self.sigma / self.xi)
        }
    }

    /// `t(z)` such that `G(z) = exp(-t)`; `None` outside the support.
    fn tail_transform(&self, z: f64) -> Option<f64> {
        let y = (z - self.mu) / self.sigma;
        if self.is_gumbel() {
            return Some((-y).exp());
        }
        let base = 1.0 + self.xi * y;
        if base <= 0.0 {
            None
        } else {
            Some(base.powf(-1.0 / self.xi))
        }
    }

    /// Log-density at `z`, `None` outside the support.
    pub fn log_density(&self, z: f64) -> Option<f64> {
        let y = (z - self.mu) / self.sigma;
        if self.is_gumbel() {
            return Some(-self.sigma.ln() - y - (-y).exp());
        }
        let base = 1.0 + self.xi * y;
        if base <= 0.0 {
            return None;
        }
        let lb = base.ln();
        Some(-self.sigma.ln() - (1.0 + 1.0 / self.xi) * lb - (-lb / self.xi).exp())
    }
}

pub fn gev_cdf(z: f64, p: &GevParams) -> f64 {
    match p.tail_transform(z) {
        Some(t) => (-t).exp(),
        // outside the support: below a finite lower endpoint (xi > 0) or above
        // a finite upper endpoint (xi < 0)
        None => {
            if p.xi > 0.0 {
                0.0
            } else {
                1.0
            }
        }
    }
}

pub fn gev_quantile(q: f64, p: &GevParams) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return domain(format!("quantile level {q} not in (0,1)"));
    }
    let t = -q.ln();
    Ok(if p.is_gumbel() {
        p.mu - p.sigma * t.ln()
    } else {
        // (t^-xi - 1) / xi computed via exp_m1 to stay accurate for small xi
        p.mu + p.sigma * (-p.xi * t.ln()).exp_m1() / p.xi
    })
}

/// T-block return level: the `1 - 1/T` quantile.
pub fn return_level(period: f64, p: &GevParams) -> Result<f64> {
    if !(period > 1.0) || period.is_nan() {
        return domain(format!("return period {period} must exceed 1"));
    }
    gev_quantile(1.0 - 1.0 / period, p)
}

/// `-sum log g(z_i)`. When observations fall outside the support the value is
/// `OUT_OF_SUPPORT_PENALTY` plus the summed (scaled) distance of the offending
/// points beyond the support boundary.
pub fn gev_neg_log_likelihood(data: &[f64], p: &GevParams) -> Result<f64> {
    if data.is_empty() {
        return domain("negative log-likelihood of empty data");
    }
    let mut nll = 0.0;
    let mut violation = 0.0;
    for &z in data {
        match p.log_density(z) {
            Some(l) => nll -= l,
            None => violation += -(1.0 + p.xi * (z - p.mu) / p.sigma) + 1.0,
        }
    }
    if violation > 0.0 {
        return Ok(OUT_OF_SUPPORT_PENALTY + violation);
    }
    Ok(nll)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub min_distinct: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            min_distinct: 10,
            max_iter: 500,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub params: GevParams,
    pub nll: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn mean_sd(data: &[f64]) -> (f64, f64) {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Gumbel moment estimates with `xi = 0.1`.
pub fn moment_start(data: &[f64]) -> Result<GevParams> {
    let (mean, sd) = mean_sd(data);
    let sigma = 6f64.sqrt() / std::f64::consts::PI * sd;
    GevParams::new(mean - EULER_GAMMA * sigma, sigma, 0.1)
}

// Optimisation runs on (mu, ln sigma, atanh xi), which keeps xi in (-1, 1).
fn to_free(p: &GevParams) -> [f64; 3] {
    [p.mu, p.sigma.ln(), p.xi.atanh()]
}

fn from_free(x: &[f64]) -> Option<GevParams> {
    GevParams::new(x[0], x[1].exp(), x[2].tanh()).ok()
}

pub fn fit_gev_mle(data: &[f64]) -> Result<FitReport> {
    fit_gev_mle_with(data, &FitOptions::default())
}

/// Maximum likelihood fit by Nelder–Mead from the moment start. The simplex
/// is restarted once around the first optimum when budget remains.
pub fn fit_gev_mle_with(data: &[f64], opts: &FitOptions) -> Result<FitReport> {
    if data.is_empty() {
        return domain("cannot fit an empty sample");
    }
    if data.iter().any(|v| !v.is_finite()) {
        return domain("sample contains non-finite values");
    }
    let (mean, sd) = mean_sd(data);
    if !(sd > 1e-10 * (1.0 + mean.abs())) {
        return Err(Error::DegenerateData(format!(
            "sample standard deviation {sd} is numerically zero"
        )));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < opts.min_distinct {
        return domain(format!(
            "{} distinct values, at least {} required",
            sorted.len(),
            opts.min_distinct
        ));
    }

    let start = moment_start(data)?;
    let objective = |x: &[f64]| match from_free(x) {
        Some(p) => gev_neg_log_likelihood(data, &p).unwrap_or(f64::INFINITY),
        None => f64::INFINITY,
    };
    let steps = |p: &GevParams| [0.25 * p.sigma, 0.25, 0.25];
    let mut nm = NelderMeadOptions {
        max_iter: opts.max_iter,
        tol: opts.tol,
    };
    let first = nelder_mead(objective, &to_free(&start), &steps(&start), &nm);
    let mut best = first.clone();
    let mut iterations = first.iterations;
    if first.converged && iterations < opts.max_iter {
        nm.max_iter = opts.max_iter - iterations;
        let p = from_free(&first.x).ok_or_else(|| Error::Internal("optimum left parameter space".into()))?;
        let small = steps(&p).map(|s| 0.1 * s);
        let second = nelder_mead(objective, &first.x, &small, &nm);
        iterations += second.iterations;
        if second.f <= best.f {
            best.x = second.x;
            best.f = second.f;
        }
        best.converged = second.converged;
    }
    let params = from_free(&best.x).ok_or_else(|| Error::Internal("optimum left parameter space".into()))?;
    let nll = best.f;
    let converged = best.converged && nll.is_finite() && nll < OUT_OF_SUPPORT_PENALTY;
    Ok(FitReport {
        params,
        nll,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(mu: f64, sigma: f64, xi: f64) -> GevParams {
        GevParams::new(mu, sigma, xi).unwrap()
    }

    #[test]
    fn invalid_scale_is_rejected() {
        assert!(matches!(GevParams::new(0.0, 0.0, 0.1), Err(Error::Parameter(_))));
        assert!(matches!(GevParams::new(0.0, -1.0, 0.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn cdf_examples() {
        assert!((gev_cdf(0.0, &p(0.0, 1.0, 0.0)) - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(gev_cdf(10.0, &p(0.0, 1.0, -0.5)), 1.0);
        // t = (1 + 0.5)^(-2)
        let want = (-(1.5f64.powi(-2))).exp();
        assert!((gev_cdf(1.0, &p(0.0, 1.0, 0.5)) - want).abs() < 1e-15);
        assert!((want - 0.641_180).abs() < 1e-6);
        assert_eq!(gev_cdf(-3.0, &p(0.0, 1.0, 0.5)), 0.0);
    }

    #[test]
    fn support_endpoints() {
        assert_eq!(p(0.0, 1.0, -0.5).support(), (f64::NEG_INFINITY, 2.0));
        assert_eq!(p(0.0, 1.0, 0.5).support(), (-2.0, f64::INFINITY));
        assert_eq!(p(1.0, 2.0, 0.0).support(), (f64::NEG_INFINITY, f64::INFINITY));
    }

    #[test]
    fn quantile_examples() {
        assert!(gev_quantile((-1f64).exp(), &p(0.0, 1.0, 0.0)).unwrap().abs() < 1e-15);
        let median = -(2f64.ln().ln());
        assert!((gev_quantile(0.5, &p(0.0, 1.0, 0.0)).unwrap() - median).abs() < 1e-15);
        assert!((median - 0.366_513).abs() < 1e-6);
        for q in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(gev_quantile(q, &p(0.0, 1.0, 0.0)), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn nll_examples() {
        assert!((gev_neg_log_likelihood(&[0.0], &p(0.0, 1.0, 0.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!(gev_neg_log_likelihood(&[3.0], &p(0.0, 1.0, -0.5)).unwrap() >= OUT_OF_SUPPORT_PENALTY);
        assert!(gev_neg_log_likelihood(&[], &p(0.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn return_level_examples() {
        let g = p(0.0, 1.0, 0.0);
        assert!((return_level(2.0, &g).unwrap() - 0.366_513).abs() < 1e-6);
        assert!(return_level(1.0, &g).is_err());
        let bounded = p(1.0, 2.0, -0.25);
        let end = bounded.support().1;
        let mut prev = f64::NEG_INFINITY;
        for t in [2.0, 10.0, 100.0, 1e4, 1e8, 1e12] {
            let r = return_level(t, &bounded).unwrap();
            assert!(r > prev && r < end);
            prev = r;
        }
        assert!(end - prev < 1e-2);
    }

    #[test]
    fn degenerate_and_sparse_samples() {
        assert!(matches!(fit_gev_mle(&[5.0; 40]), Err(Error::DegenerateData(_))));
        let few: Vec<f64> = (0..30).map(|i| (i % 4) as f64).collect();
        assert!(matches!(fit_gev_mle(&few), Err(Error::Domain(_))));
        assert!(fit_gev_mle(&[]).is_err());
    }
}
