//! Nonparametric extremal-dependence diagnostics.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Error, Result};
use crate::grid::PseudoGrid;

/// Default threshold probability for empirical extremal correlations.
pub const DEFAULT_Q: f64 = 0.95;

/// Minimum number of retained angles for a spectral sample.
pub const MIN_ANGLES: usize = 5;

/// Grid site addressed by (row, col).
pub type Site = (usize, usize);

/// Ranks divided by `n + 1`, ties receive their average rank.
pub fn rank_transform(column: &[f64]) -> Result<Vec<f64>> {
    let n = column.len();
    if n < 2 {
        return domain(format!("rank transform needs at least 2 values, got {n}"));
    }
    if column.iter().any(|v| v.is_nan()) {
        return domain("rank transform of NaN");
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
    let mut out = vec![0.0; n];
    let denom = (n + 1) as f64;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && column[order[end]] == column[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let midrank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            out[i] = midrank / denom;
        }
        start = end;
    }
    Ok(out)
}

fn check_threshold(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return domain(format!("threshold {q} not in (0,1)"));
    }
    Ok(())
}

/// `#{u > q and v > q} / #{v > q}`.
pub fn chi_empirical(u: &[f64], v: &[f64], q: f64) -> Result<f64> {
    if u.len() != v.len() {
        return domain(format!("length mismatch {} vs {}", u.len(), v.len()));
    }
    if u.len() < 2 {
        return domain("chi needs at least 2 observations");
    }
    check_threshold(q)?;
    let mut marginal = 0usize;
    let mut joint = 0usize;
    for (&a, &b) in u.iter().zip(v) {
        if b > q {
            marginal += 1;
            if a > q {
                joint += 1;
            }
        }
    }
    if marginal == 0 {
        return Err(Error::Undefined(format!("no exceedances of q={q}")));
    }
    Ok((joint as f64 / marginal as f64).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiMatrix {
    pub pairs: Vec<(Site, Site)>,
    /// `None` marks a pair whose estimate is undefined.
    pub chi: Vec<Option<f64>>,
    pub q: f64,
}

impl ChiMatrix {
    pub fn undefined_count(&self) -> usize {
        self.chi.iter().filter(|c| c.is_none()).count()
    }

    pub fn defined(&self) -> impl Iterator<Item = ((Site, Site), f64)> + '_ {
        self.pairs
            .iter()
            .zip(&self.chi)
            .filter_map(|(p, c)| c.map(|c| (*p, c)))
    }
}

fn check_site(pseudo: &PseudoGrid, s: Site) -> Result<()> {
    let (h, w) = pseudo.shape();
    if s.0 >= h || s.1 >= w {
        return domain(format!("site {s:?} outside {h}x{w} grid"));
    }
    Ok(())
}

/// Empirical χ for every pair; undefined estimates are recorded as `None`.
pub fn chi_matrix(pseudo: &PseudoGrid, pairs: &[(Site, Site)], q: f64) -> Result<ChiMatrix> {
    check_threshold(q)?;
    let mut chi = Vec::with_capacity(pairs.len());
    for &(a, b) in pairs {
        check_site(pseudo, a)?;
        check_site(pseudo, b)?;
        let u = pseudo.site_series(a.0, a.1);
        let v = pseudo.site_series(b.0, b.1);
        match chi_empirical(&u, &v, q) {
            Ok(c) => chi.push(Some(c)),
            Err(Error::Undefined(_)) => chi.push(None),
            Err(e) => return Err(e),
        }
    }
    Ok(ChiMatrix {
        pairs: pairs.to_vec(),
        chi,
        q,
    })
}

/// `count` distinct unordered site pairs drawn uniformly without replacement.
pub fn sample_site_pairs(height: usize, width: usize, count: usize, seed: u64) -> Result<Vec<(Site, Site)>> {
    let sites = height * width;
    let total = sites * sites.saturating_sub(1) / 2;
    if count == 0 || count > total {
        return domain(format!(
            "cannot draw {count} distinct pairs from {sites} sites ({total} available)"
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = sample(&mut rng, total, count).into_vec();
    picks.sort_unstable();
    Ok(picks
        .into_iter()
        .map(|k| {
            let (i, j) = unrank_pair(k, sites);
            ((i / width, i % width), (j / width, j % width))
        })
        .collect())
}

// k-th pair (i < j) in lexicographic order over `n` items
fn unrank_pair(mut k: usize, n: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if k < row {
            return (i, i + 1 + k);
        }
        k -= row;
        i += 1;
    }
}

pub fn frechet_transform(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return domain(format!("Frechet transform of {u} outside (0,1)"));
    }
    Ok(-1.0 / u.ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSample {
    pub angles: Vec<f64>,
    pub threshold_u: f64,
    pub pair: (Site, Site),
}

/// Type-7 (linear interpolation) empirical quantile of unsorted data.
pub fn empirical_quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Angles `x/(x+y)` on the unit-Fréchet scale for radii above the empirical
/// `radius_quantile` of all radii.
pub fn spectral_empirical(u: &[f64], v: &[f64], radius_quantile: f64) -> Result<SpectralSample> {
    spectral_for_pair(u, v, radius_quantile, ((0, 0), (0, 0)))
}

pub fn spectral_for_pair(u: &[f64], v: &[f64], radius_quantile: f64, pair: (Site, Site)) -> Result<SpectralSample> {
    if u.len() != v.len() {
        return domain(format!("length mismatch {} vs {}", u.len(), v.len()));
    }
    check_threshold(radius_quantile)?;
    let mut radii = Vec::with_capacity(u.len());
    let mut angles = Vec::with_capacity(u.len());
    for (&a, &b) in u.iter().zip(v) {
        let x = frechet_transform(a)?;
        let y = frechet_transform(b)?;
        let r = x + y;
        radii.push(r);
        angles.push(x / r);
    }
    if radii.is_empty() {
        return Err(Error::InsufficientExceedances("empty sample".into()));
    }
    let threshold_u = empirical_quantile(&radii, radius_quantile);
    let kept: Vec<f64> = radii
        .iter()
        .zip(&angles)
        .filter(|(r, _)| **r > threshold_u)
        .map(|(_, w)| *w)
        .collect();
    if kept.len() < MIN_ANGLES {
        return Err(Error::InsufficientExceedances(format!(
            "{} angles above radius {threshold_u}, need {MIN_ANGLES}",
            kept.len()
        )));
    }
    Ok(SpectralSample {
        angles: kept,
        threshold_u,
        pair,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiError {
    pub value: f64,
    pub skipped: usize,
    pub used: usize,
}

/// Euclidean distance between χ vectors over pairs defined in both inputs.
pub fn chi_l2_error(a: &ChiMatrix, b: &ChiMatrix) -> Result<ChiError> {
    if a.pairs != b.pairs {
        return domain("chi matrices cover different pairs");
    }
    if a.q != b.q {
        return domain(format!("chi matrices use different thresholds {} vs {}", a.q, b.q));
    }
    let mut sum = 0.0;
    let mut skipped = 0;
    let mut used = 0;
    for (x, y) in a.chi.iter().zip(&b.chi) {
        match (x, y) {
            (Some(x), Some(y)) => {
                sum += (x - y).powi(2);
                used += 1;
            }
            _ => skipped += 1,
        }
    }
    Ok(ChiError {
        value: sum.sqrt(),
        skipped,
        used,
    })
}
