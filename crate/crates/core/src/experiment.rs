//! Evaluation protocol on synthetic ground truth: χ error traces of the
//! emulator against held-out data for several training-set sizes, with the
//! train-set benchmark and the independence baseline for reference.

use evtgan_nnet::GanConfig;

use crate::brown_resnick::SiteGeometry;
use crate::dependence::{chi_l2_error, chi_matrix, sample_site_pairs, Site};
use crate::error::{Error, Result};
use crate::grid::{MaximaGrid, PseudoGrid};
use crate::margins::to_pseudo_obs;
use crate::pipeline::{train_evtgan, EmulatorModel, TraceOptions, TracePoint, TrainOptions};
use crate::registry::{ChiContext, DependenceModel, Independence};

/// Smallest dataset accepted by the sensitivity protocol.
pub const MIN_OBSERVATIONS: usize = 2000;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub n_train: usize,
    pub gan: GanConfig,
    pub width_factor: usize,
    pub trace_every: usize,
    pub q: f64,
    pub n_pairs: usize,
    pub pair_seed: u64,
    pub sample_seed: u64,
    /// Generated fields per χ evaluation; the test-set size when `None`.
    pub n_samples: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            n_train: 50,
            gan: GanConfig::default(),
            width_factor: 1,
            trace_every: 500,
            q: crate::dependence::DEFAULT_Q,
            n_pairs: 100,
            pair_seed: 0,
            sample_seed: 0,
            n_samples: None,
        }
    }
}

#[derive(Clone)]
pub struct RunResult {
    pub n_train: usize,
    pub seed: u64,
    pub pairs: Vec<(Site, Site)>,
    pub trace: Vec<TracePoint>,
    /// `||chi_model - chi_test||` at the last epoch.
    pub final_c_te: f64,
    pub final_c_tr: f64,
    /// `||chi_train - chi_test||`.
    pub benchmark: f64,
    /// `||chi_independent - chi_test||`.
    pub independence: f64,
    pub model: EmulatorModel,
    pub train_pseudo: PseudoGrid,
    pub test_pseudo: PseudoGrid,
}

/// Train on the first `n_train` observations, evaluating against the rest.
pub fn evaluate_run(data: &MaximaGrid, opts: &RunOptions) -> Result<RunResult> {
    let (train, test) = data.split(opts.n_train)?;
    let train_pseudo = to_pseudo_obs(&train)?;
    let test_pseudo = to_pseudo_obs(&test)?;
    let (h, w) = data.shape();
    let pairs = sample_site_pairs(h, w, opts.n_pairs, opts.pair_seed)?;
    let n_gen = opts.n_samples.unwrap_or(test.n());
    let trace = TraceOptions {
        every: opts.trace_every,
        q: opts.q,
        pairs: pairs.clone(),
        test: Some(test_pseudo.clone()),
        n_samples: n_gen,
        sample_seed: opts.sample_seed,
    };
    let train_opts = TrainOptions {
        gan: opts.gan.clone(),
        width_factor: opts.width_factor,
        trace: Some(trace),
    };
    let model = train_evtgan(&train_pseudo, &train_opts)?;
    let chi_test = chi_matrix(&test_pseudo, &pairs, opts.q)?;
    let chi_train = chi_matrix(&train_pseudo, &pairs, opts.q)?;
    let (final_c_te, final_c_tr) = match model.trace().last() {
        Some(p) if p.epoch == opts.gan.epochs => (
            p.c_te.map(|e| e.value).unwrap_or(f64::NAN),
            p.c_tr.value,
        ),
        _ => {
            let chi = crate::pipeline::generated_chi(model.gan(), n_gen, opts.sample_seed, &pairs, opts.q)?;
            (chi_l2_error(&chi, &chi_test)?.value, chi_l2_error(&chi, &chi_train)?.value)
        }
    };
    let geometry = SiteGeometry::grid(h, w);
    let ctx = ChiContext {
        train: &train_pseudo,
        geometry: &geometry,
        pairs: &pairs,
        q: opts.q,
        n_samples: n_gen,
        seed: opts.sample_seed,
        emulator: None,
    };
    let independence = chi_l2_error(&Independence.chi(&ctx)?, &chi_test)?.value;
    let benchmark = chi_l2_error(&chi_train, &chi_test)?.value;
    Ok(RunResult {
        n_train: opts.n_train,
        seed: opts.gan.seed,
        pairs,
        trace: model.trace().to_vec(),
        final_c_te,
        final_c_tr,
        benchmark,
        independence,
        model,
        train_pseudo,
        test_pseudo,
    })
}

/// The sensitivity study: one run per training-set size.
pub fn sensitivity(data: &MaximaGrid, n_train: &[usize], base: &RunOptions) -> Result<Vec<RunResult>> {
    if data.n() < MIN_OBSERVATIONS {
        return Err(Error::Shape(format!(
            "sensitivity study needs at least {MIN_OBSERVATIONS} observations, got {}",
            data.n()
        )));
    }
    n_train
        .iter()
        .map(|&n| {
            evaluate_run(
                data,
                &RunOptions {
                    n_train: n,
                    ..base.clone()
                },
            )
        })
        .collect()
}

/// True when `values` never increase from one entry to the next.
pub fn non_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0])
}

/// Strict majority of `flags` is true.
pub fn majority(flags: &[bool]) -> bool {
    2 * flags.iter().filter(|f| **f).count() > flags.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helpers() {
        assert!(non_increasing(&[3.0, 2.0, 2.0, 1.0]));
        assert!(!non_increasing(&[1.0, 2.0]));
        assert!(majority(&[true, true, false]));
        assert!(!majority(&[true, false]));
    }
}
