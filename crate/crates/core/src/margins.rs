//! Per-site marginal models: GEV fits on a grid and the empirical
//! alternative used by the raw-DCGAN ablation.

use rayon::prelude::*;

use crate::dependence::rank_transform;
use crate::error::{domain, Error, Result};
use crate::gev::{fit_gev_mle_with, gev_cdf, gev_quantile, FitOptions, FitReport, GevParams};
use crate::grid::{GridData, MaximaGrid, PseudoGrid};

/// Maximum tolerated share of failed site fits.
pub const MAX_FAILURE_SHARE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub enum SiteMargin {
    Fitted(FitReport),
    Failed {
        reason: String,
        report: Option<FitReport>,
    },
}

impl SiteMargin {
    pub fn params(&self) -> Option<&GevParams> {
        match self {
            SiteMargin::Fitted(r) => Some(&r.params),
            SiteMargin::Failed { .. } => None,
        }
    }

    pub fn report(&self) -> Option<&FitReport> {
        match self {
            SiteMargin::Fitted(r) => Some(r),
            SiteMargin::Failed { report, .. } => report.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalModelGrid {
    height: usize,
    width: usize,
    sites: Vec<SiteMargin>,
}

impl MarginalModelGrid {
    pub fn new(height: usize, width: usize, sites: Vec<SiteMargin>) -> Result<Self> {
        if sites.len() != height * width {
            return Err(Error::Shape(format!(
                "{} site margins for a {height}x{width} grid",
                sites.len()
            )));
        }
        Ok(Self { height, width, sites })
    }

    /// Every site follows the same law.
    pub fn uniform(height: usize, width: usize, params: GevParams) -> Self {
        let report = FitReport {
            params,
            nll: 0.0,
            iterations: 0,
            converged: true,
        };
        Self {
            height,
            width,
            sites: vec![SiteMargin::Fitted(report); height * width],
        }
    }

    pub fn from_params(height: usize, width: usize, params: Vec<GevParams>) -> Result<Self> {
        let sites = params
            .into_iter()
            .map(|params| {
                SiteMargin::Fitted(FitReport {
                    params,
                    nll: 0.0,
                    iterations: 0,
                    converged: true,
                })
            })
            .collect();
        Self::new(height, width, sites)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn site(&self, row: usize, col: usize) -> &SiteMargin {
        &self.sites[row * self.width + col]
    }

    pub fn sites(&self) -> &[SiteMargin] {
        &self.sites
    }

    /// `(row, col)` of every failed site.
    pub fn failed_sites(&self) -> Vec<(usize, usize)> {
        self.sites
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, SiteMargin::Failed { .. }))
            .map(|(k, _)| (k / self.width, k % self.width))
            .collect()
    }

    fn all_params(&self) -> Result<Vec<GevParams>> {
        let failed = self.failed_sites();
        if !failed.is_empty() {
            return Err(Error::Quality(format!(
                "no GEV fit at sites {failed:?}; cannot transform these margins"
            )));
        }
        Ok(self.sites.iter().filter_map(|s| s.params().copied()).collect())
    }
}

fn fit_site(series: &[f64], opts: &FitOptions) -> SiteMargin {
    match fit_gev_mle_with(series, opts) {
        Ok(r) if r.converged => SiteMargin::Fitted(r),
        Ok(r) => SiteMargin::Failed {
            reason: format!("optimizer did not converge in {} iterations", r.iterations),
            report: Some(r),
        },
        Err(e) => SiteMargin::Failed {
            reason: e.to_string(),
            report: None,
        },
    }
}

pub fn fit_margins(maxima: &MaximaGrid) -> Result<MarginalModelGrid> {
    fit_margins_with(maxima, &FitOptions::default(), true)
}

/// Independent GEV fit per site. Failures are recorded per site; more than
/// `MAX_FAILURE_SHARE` of failed sites is a quality error.
pub fn fit_margins_with(maxima: &MaximaGrid, opts: &FitOptions, parallel: bool) -> Result<MarginalModelGrid> {
    let grid = fit_sites(maxima, opts, parallel)?;
    check_failure_share(&grid)?;
    Ok(grid)
}

/// Per-site fits without the failure-share check.
pub fn fit_sites(maxima: &MaximaGrid, opts: &FitOptions, parallel: bool) -> Result<MarginalModelGrid> {
    let (h, w) = maxima.shape();
    let series: Vec<Vec<f64>> = (0..h * w).map(|k| maxima.site_series(k / w, k % w)).collect();
    let sites: Vec<SiteMargin> = if parallel {
        series.par_iter().map(|s| fit_site(s, opts)).collect()
    } else {
        series.iter().map(|s| fit_site(s, opts)).collect()
    };
    MarginalModelGrid::new(h, w, sites)
}

pub fn check_failure_share(grid: &MarginalModelGrid) -> Result<()> {
    let (h, w) = grid.shape();
    let failed = grid.failed_sites();
    if failed.len() as f64 > MAX_FAILURE_SHARE * (h * w) as f64 {
        return Err(Error::Quality(format!(
            "{} of {} sites failed GEV fitting (limit {:.0}%): {:?}",
            failed.len(),
            h * w,
            MAX_FAILURE_SHARE * 100.0,
            failed
        )));
    }
    for &(r, c) in &failed {
        if let SiteMargin::Failed { reason, .. } = grid.site(r, c) {
            log::warn!("GEV fit failed at site ({r}, {c}): {reason}");
        }
    }
    Ok(())
}

fn check_shapes(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("grid {a:?} does not match margins {b:?}")));
    }
    Ok(())
}

/// Per-site rank transform to pseudo-observations.
pub fn to_pseudo_obs(maxima: &MaximaGrid) -> Result<PseudoGrid> {
    let (h, w) = maxima.shape();
    let series = (0..h * w)
        .map(|k| rank_transform(&maxima.site_series(k / w, k % w)))
        .collect::<Result<Vec<_>>>()?;
    PseudoGrid::new(GridData::from_site_series(maxima.n(), h, w, &series)?)
}

/// Smallest distance kept between pseudo-observations and the ends of (0,1).
pub const PSEUDO_CLAMP: f64 = 1e-12;

/// Normalisation through the fitted GEV distribution functions.
pub fn to_pseudo_obs_gev(maxima: &MaximaGrid, margins: &MarginalModelGrid) -> Result<PseudoGrid> {
    check_shapes(maxima.shape(), margins.shape())?;
    let params = margins.all_params()?;
    let s = params.len();
    let values = maxima
        .data()
        .values()
        .iter()
        .enumerate()
        .map(|(i, z)| gev_cdf(*z, &params[i % s]).clamp(PSEUDO_CLAMP, 1.0 - PSEUDO_CLAMP))
        .collect();
    let (h, w) = maxima.shape();
    PseudoGrid::new(GridData::new(maxima.n(), h, w, values)?)
}

/// Apply the fitted GEV quantile function per site.
pub fn inverse_transform(pseudo: &PseudoGrid, margins: &MarginalModelGrid, variable: &str) -> Result<MaximaGrid> {
    check_shapes(pseudo.shape(), margins.shape())?;
    let params = margins.all_params()?;
    let s = params.len();
    let values = pseudo
        .data()
        .values()
        .iter()
        .enumerate()
        .map(|(i, u)| gev_quantile(*u, &params[i % s]))
        .collect::<Result<Vec<_>>>()?;
    let (h, w) = pseudo.shape();
    MaximaGrid::new(GridData::new(pseudo.n(), h, w, values)?, 0, variable)
}

/// Per-site empirical quantile functions of a training sample: linear
/// interpolation between order statistics placed at `i/(n+1)`, held constant
/// beyond the extreme ones. Values never leave the training range.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMargins {
    height: usize,
    width: usize,
    sorted: Vec<Vec<f64>>,
}

impl EmpiricalMargins {
    pub fn from_maxima(maxima: &MaximaGrid) -> Self {
        let (h, w) = maxima.shape();
        let sorted = (0..h * w)
            .map(|k| {
                let mut s = maxima.site_series(k / w, k % w);
                s.sort_by(f64::total_cmp);
                s
            })
            .collect();
        Self {
            height: h,
            width: w,
            sorted,
        }
    }

    pub fn quantile(&self, site: usize, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return domain(format!("pseudo value {u} outside (0,1)"));
        }
        let s = &self.sorted[site];
        let n = s.len();
        let pos = (u * (n + 1) as f64 - 1.0).clamp(0.0, (n - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        Ok(s[lo] + (pos - lo as f64) * (s[hi] - s[lo]))
    }

    pub fn inverse_transform(&self, pseudo: &PseudoGrid, variable: &str) -> Result<MaximaGrid> {
        check_shapes(pseudo.shape(), (self.height, self.width))?;
        let sites = self.height * self.width;
        let values = pseudo
            .data()
            .values()
            .iter()
            .enumerate()
            .map(|(i, u)| self.quantile(i % sites, *u))
            .collect::<Result<Vec<_>>>()?;
        MaximaGrid::new(GridData::new(pseudo.n(), self.height, self.width, values)?, 0, variable)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> MaximaGrid {
        let s = h * w;
        let values = (0..n * s).map(|i| f(i / s, i % s)).collect();
        MaximaGrid::new(GridData::new(n, h, w, values).unwrap(), 1, "x").unwrap()
    }

    #[test]
    fn hand_ranks_single_site() {
        let g = grid(3, 1, 1, |i, _| [7.0, 1.0, 4.0][i]);
        assert_eq!(to_pseudo_obs(&g).unwrap().data().values(), &[0.75, 0.25, 0.5]);
    }

    #[test]
    fn constant_site_fails_alone() {
        // 21 sites, one constant: one failure is under the 5% limit
        let gumbel = |i: usize, k: usize| {
            let p = (((i * 7 + k * 13) % 60) as f64 + 0.5) / 60.0;
            -(-p.ln()).ln()
        };
        let g = grid(60, 3, 7, |i, k| if k == 4 { 2.0 } else { gumbel(i, k) });
        let m = fit_margins_with(&g, &FitOptions::default(), false).unwrap();
        assert_eq!(m.failed_sites(), vec![(0, 4)]);
        let pseudo = to_pseudo_obs(&g).unwrap();
        let err = inverse_transform(&pseudo, &m, "x").unwrap_err();
        assert!(err.to_string().contains("(0, 4)"));
    }

    #[test]
    fn too_many_failures_is_quality_error() {
        let g = grid(40, 2, 2, |i, k| if k < 1 { 1.0 } else { (i * (k + 3) % 40) as f64 });
        assert!(matches!(fit_margins(&g), Err(Error::Quality(_))));
    }

    #[test]
    fn empirical_inverse_reproduces_order_statistics() {
        let g = grid(4, 1, 1, |i, _| [3.0, 9.0, 1.0, 5.0][i]);
        let e = EmpiricalMargins::from_maxima(&g);
        for (i, want) in [1.0, 3.0, 5.0, 9.0].iter().enumerate() {
            assert!((e.quantile(0, (i + 1) as f64 / 5.0).unwrap() - want).abs() < 1e-12);
        }
        assert_eq!(e.quantile(0, 0.999_999).unwrap(), 9.0);
        assert_eq!(e.quantile(0, 1e-9).unwrap(), 1.0);
        assert_eq!(e.quantile(0, 0.5).unwrap(), 4.0);
    }

    #[test]
    fn median_pseudo_maps_to_gev_medians() {
        let p = GevParams::new(3.0, 2.0, 0.1).unwrap();
        let m = MarginalModelGrid::uniform(2, 2, p);
        let pseudo = PseudoGrid::new(GridData::new(1, 2, 2, vec![0.5; 4]).unwrap());
        // a single observation is below the maxima-grid minimum of 2
        assert!(inverse_transform(&pseudo.unwrap(), &m, "x").is_err());
        let pseudo = PseudoGrid::new(GridData::new(2, 2, 2, vec![0.5; 8]).unwrap()).unwrap();
        let out = inverse_transform(&pseudo, &m, "x").unwrap();
        let med = gev_quantile(0.5, &p).unwrap();
        assert!(out.data().values().iter().all(|v| *v == med));
    }
}
