//! The evtGAN algorithm: block maxima, marginal GEV fits, normalisation,
//! adversarial training on the dependence structure, sampling and
//! back-transformation to the physical scale.

use evtgan_nnet::{Checkpoint, EpochLosses, Gan, GanArch, GanConfig, Tensor};
use sha2::{Digest, Sha256};

use crate::dependence::{chi_l2_error, chi_matrix, rank_transform, ChiError, ChiMatrix, Site};
use crate::error::{Error, Result};
use crate::grid::{GridData, MaximaGrid, PseudoGrid};
use crate::gev::{FitReport, GevParams};
use crate::margins::{
    fit_margins, inverse_transform, to_pseudo_obs, to_pseudo_obs_gev, EmpiricalMargins, MarginalModelGrid,
    SiteMargin, PSEUDO_CLAMP,
};

/// Componentwise maxima over consecutive blocks of `k` time steps of an
/// `m x H x W` series. A trailing partial block is dropped.
pub fn block_maxima(series: &GridData, k: usize, variable: &str) -> Result<MaximaGrid> {
    let m = series.n();
    if k == 0 || k > m {
        return Err(Error::Domain(format!("block length {k} not in 1..={m}")));
    }
    let n = m / k;
    if m % k != 0 {
        log::warn!("dropping {} trailing time steps that do not fill a block of {k}", m % k);
    }
    let sites = series.sites();
    let mut values = vec![f64::NEG_INFINITY; n * sites];
    for b in 0..n {
        let out = &mut values[b * sites..(b + 1) * sites];
        for t in b * k..(b + 1) * k {
            for (o, v) in out.iter_mut().zip(series.observation(t)) {
                *o = o.max(*v);
            }
        }
    }
    let (h, w) = series.shape();
    MaximaGrid::new(GridData::new(n, h, w, values)?, k, variable)
}

/// How margins are removed before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Per-site ranks over `n + 1`.
    Empirical,
    /// Fitted GEV distribution functions.
    Gev,
}

impl Normalization {
    pub const NAMES: [&'static str; 2] = ["empirical", "gev"];

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "empirical" => Ok(Self::Empirical),
            "gev" => Ok(Self::Gev),
            other => Err(Error::UnknownStrategy {
                kind: "normalization",
                name: other.to_string(),
                known: Self::NAMES.join(", "),
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Empirical => "empirical",
            Self::Gev => "gev",
        }
    }

    pub fn apply(&self, maxima: &MaximaGrid, margins: &MarginalModelGrid) -> Result<PseudoGrid> {
        match self {
            Self::Empirical => to_pseudo_obs(maxima),
            Self::Gev => to_pseudo_obs_gev(maxima, margins),
        }
    }
}

/// Periodic χ evaluation of the EMA generator during training.
#[derive(Debug, Clone)]
pub struct TraceOptions {
    pub every: usize,
    pub q: f64,
    pub pairs: Vec<(Site, Site)>,
    /// Held-out pseudo-observations; when absent only the train error is traced.
    pub test: Option<PseudoGrid>,
    pub n_samples: usize,
    pub sample_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub epoch: usize,
    pub c_tr: ChiError,
    pub c_te: Option<ChiError>,
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub gan: GanConfig,
    /// Channel counts of the standard stack are divided by this factor.
    pub width_factor: usize,
    pub trace: Option<TraceOptions>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            gan: GanConfig::default(),
            width_factor: 1,
            trace: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub data_digest: String,
}

/// Trained generator (raw and EMA weights), its margins and training history.
#[derive(Clone)]
pub struct EmulatorModel {
    gan: Gan,
    margins: Option<MarginalModelGrid>,
    provenance: Provenance,
    losses: Vec<EpochLosses>,
    trace: Vec<TracePoint>,
}

impl EmulatorModel {
    pub fn from_parts(gan: Gan, margins: Option<MarginalModelGrid>, provenance: Provenance) -> Result<Self> {
        if let Some(m) = &margins {
            let a = gan.arch();
            if m.shape() != (a.height, a.width) {
                return Err(Error::Shape(format!(
                    "margins {:?} do not match generator grid {}x{}",
                    m.shape(),
                    a.height,
                    a.width
                )));
            }
        }
        Ok(Self {
            gan,
            margins,
            provenance,
            losses: Vec::new(),
            trace: Vec::new(),
        })
    }

    pub fn gan(&self) -> &Gan {
        &self.gan
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.gan.arch().height, self.gan.arch().width)
    }

    pub fn margins(&self) -> Option<&MarginalModelGrid> {
        self.margins.as_ref()
    }

    pub fn with_margins(mut self, margins: MarginalModelGrid) -> Result<Self> {
        if margins.shape() != self.shape() {
            return Err(Error::Shape(format!(
                "margins {:?} do not match model {:?}",
                margins.shape(),
                self.shape()
            )));
        }
        self.margins = Some(margins);
        Ok(self)
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn losses(&self) -> &[EpochLosses] {
        &self.losses
    }

    pub fn trace(&self) -> &[TracePoint] {
        &self.trace
    }

    /// Network weights plus training configuration, provenance and margins.
    /// Loss history and trace are not stored.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = self.gan.to_checkpoint();
        let c = self.gan.config();
        let seed = self.provenance.seed;
        let config = vec![
            c.learning_rate,
            c.batch_size as f64,
            c.epochs as f64,
            c.disc_steps_per_gen_step as f64,
            c.ema_alpha,
            c.latent_dim as f64,
            (c.seed >> 32) as f64,
            (c.seed & 0xffff_ffff) as f64,
            c.adam_beta1,
            c.adam_beta2,
            c.adam_eps,
            (seed >> 32) as f64,
            (seed & 0xffff_ffff) as f64,
        ];
        ck.push(CK_CONFIG, Tensor::from_vec(&[config.len()], config).expect("1-d"));
        let digest: Vec<f64> = self.provenance.data_digest.bytes().map(f64::from).collect();
        ck.push(CK_DIGEST, Tensor::from_vec(&[digest.len()], digest).expect("1-d"));
        if let Some(m) = &self.margins {
            let (h, w) = m.shape();
            let mut v = Vec::with_capacity(h * w * MARGIN_FIELDS);
            for site in m.sites() {
                match site {
                    SiteMargin::Fitted(r) => v.extend([
                        1.0,
                        r.params.mu(),
                        r.params.sigma(),
                        r.params.xi(),
                        r.nll,
                        r.iterations as f64,
                    ]),
                    SiteMargin::Failed { .. } => v.extend([0.0, f64::NAN, f64::NAN, f64::NAN, f64::NAN, 0.0]),
                }
            }
            ck.push(CK_MARGINS, Tensor::from_vec(&[h, w, MARGIN_FIELDS], v).expect("consistent extents"));
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let fmt = |m: &str| Error::Format(format!("checkpoint: {m}"));
        let c = ck.get(CK_CONFIG).ok_or_else(|| fmt("missing training configuration"))?.data();
        if c.len() != 13 {
            return Err(fmt("configuration record has the wrong length"));
        }
        let join = |hi: f64, lo: f64| ((hi as u64) << 32) | lo as u64;
        let config = GanConfig {
            learning_rate: c[0],
            batch_size: c[1] as usize,
            epochs: c[2] as usize,
            disc_steps_per_gen_step: c[3] as usize,
            ema_alpha: c[4],
            latent_dim: c[5] as usize,
            seed: join(c[6], c[7]),
            adam_beta1: c[8],
            adam_beta2: c[9],
            adam_eps: c[10],
        };
        let seed = join(c[11], c[12]);
        let digest = ck
            .get(CK_DIGEST)
            .map(|t| t.data().iter().map(|&b| b as u8 as char).collect())
            .unwrap_or_default();
        let gan = Gan::from_checkpoint(ck, config)?;
        let margins = match ck.get(CK_MARGINS) {
            None => None,
            Some(t) => {
                let shape = t.shape();
                if shape.len() != 3 || shape[2] != MARGIN_FIELDS {
                    return Err(fmt("margin record has the wrong shape"));
                }
                let sites = t
                    .data()
                    .chunks(MARGIN_FIELDS)
                    .map(|r| {
                        Ok(if r[0] == 1.0 {
                            SiteMargin::Fitted(FitReport {
                                params: GevParams::new(r[1], r[2], r[3])?,
                                nll: r[4],
                                iterations: r[5] as usize,
                                converged: true,
                            })
                        } else {
                            SiteMargin::Failed {
                                reason: "failed at training time".into(),
                                report: None,
                            }
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(MarginalModelGrid::new(shape[0], shape[1], sites)?)
            }
        };
        Self::from_parts(
            gan,
            margins,
            Provenance {
                seed,
                data_digest: digest,
            },
        )
    }
}

const CK_CONFIG: &str = "evtgan/config";
const CK_DIGEST: &str = "evtgan/data_digest";
const CK_MARGINS: &str = "evtgan/margins";
const MARGIN_FIELDS: usize = 6;

/// SHA-256 of the little-endian bytes of `values`, hex encoded.
pub fn digest_values(values: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    format!("{:x}", h.finalize())
}

fn to_tensor(pseudo: &PseudoGrid) -> Result<Tensor> {
    let (h, w) = pseudo.shape();
    Ok(Tensor::from_vec(&[pseudo.n(), 1, h, w], pseudo.data().values().to_vec())?)
}

fn tensor_to_pseudo(t: Tensor, h: usize, w: usize) -> Result<PseudoGrid> {
    let n = t.batch();
    let values = t.into_data().into_iter().map(|v| v.clamp(PSEUDO_CLAMP, 1.0 - PSEUDO_CLAMP)).collect();
    PseudoGrid::new(GridData::new(n, h, w, values)?)
}

/// Per-site ranks of a pseudo grid (used before χ estimation on generated data).
pub fn rerank(pseudo: &PseudoGrid) -> Result<PseudoGrid> {
    let (h, w) = pseudo.shape();
    let series = (0..h * w)
        .map(|k| rank_transform(&pseudo.site_series(k / w, k % w)))
        .collect::<Result<Vec<_>>>()?;
    PseudoGrid::new(GridData::from_site_series(pseudo.n(), h, w, &series)?)
}

/// Empirical χ of `n` fresh draws from the EMA generator, after ranking.
pub fn generated_chi(gan: &Gan, n: usize, seed: u64, pairs: &[(Site, Site)], q: f64) -> Result<ChiMatrix> {
    let a = gan.arch();
    let pseudo = tensor_to_pseudo(gan.sample(n, seed)?, a.height, a.width)?;
    chi_matrix(&rerank(&pseudo)?, pairs, q)
}

/// Train the DCGAN on pseudo-observations.
pub fn train_evtgan(pseudo: &PseudoGrid, opts: &TrainOptions) -> Result<EmulatorModel> {
    let (h, w) = pseudo.shape();
    let arch = GanArch::narrowed(h, w, opts.gan.latent_dim, opts.width_factor);
    let mut gan = Gan::new(arch, opts.gan.clone())?;
    let data = to_tensor(pseudo)?;

    let reference = match &opts.trace {
        Some(t) => {
            if t.every == 0 || t.n_samples < 2 {
                return Err(Error::Parameter("trace needs every >= 1 and n_samples >= 2".into()));
            }
            let train = chi_matrix(pseudo, &t.pairs, t.q)?;
            let test = t.test.as_ref().map(|g| chi_matrix(g, &t.pairs, t.q)).transpose()?;
            Some((t, train, test))
        }
        None => None,
    };
    let mut trace = Vec::new();
    let mut trace_err: Option<Error> = None;
    let losses = gan.train(&data, |g, l| {
        if let Some((t, train, test)) = &reference {
            if l.epoch % t.every == 0 {
                let step = (|| -> Result<TracePoint> {
                    let chi = generated_chi(g, t.n_samples, t.sample_seed, &t.pairs, t.q)?;
                    Ok(TracePoint {
                        epoch: l.epoch,
                        c_tr: chi_l2_error(&chi, train)?,
                        c_te: test.as_ref().map(|te| chi_l2_error(&chi, te)).transpose()?,
                    })
                })();
                match step {
                    Ok(p) => trace.push(p),
                    Err(e) => {
                        trace_err = Some(e);
                        return Err(evtgan_nnet::NnError::Contract("trace evaluation failed".into()));
                    }
                }
            }
        }
        Ok(())
    });
    if let Some(e) = trace_err {
        return Err(e);
    }
    let losses = losses?;
    let provenance = Provenance {
        seed: opts.gan.seed,
        data_digest: digest_values(pseudo.data().values()),
    };
    let mut model = EmulatorModel::from_parts(gan, None, provenance)?;
    model.losses = losses;
    model.trace = trace;
    Ok(model)
}

/// Default number of emulated fields.
pub const DEFAULT_N_STAR: usize = 10_000;

/// `n_star` pseudo-uniform fields from the EMA generator in eval mode.
pub fn sample_emulator(model: &EmulatorModel, n_star: usize, seed: u64) -> Result<PseudoGrid> {
    if model.gan.epochs_done() == 0 {
        return Err(Error::State("model has not been trained".into()));
    }
    if n_star == 0 {
        return Err(Error::Parameter("n_star must be >= 1".into()));
    }
    let (h, w) = model.shape();
    tensor_to_pseudo(model.gan.sample(n_star, seed)?, h, w)
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub n_train: usize,
    pub normalization: Normalization,
    pub train: TrainOptions,
    pub n_star: usize,
    pub sample_seed: u64,
    /// Re-rank generated fields to exact uniform margins before back-transforming.
    pub rerank: bool,
    /// Also back-transform through the empirical train margins (raw DCGAN path).
    pub ablation: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n_train: 50,
            normalization: Normalization::Empirical,
            train: TrainOptions::default(),
            n_star: DEFAULT_N_STAR,
            sample_seed: 0,
            rerank: false,
            ablation: false,
        }
    }
}

pub struct PipelineOutput {
    pub train: MaximaGrid,
    pub test: MaximaGrid,
    pub margins: MarginalModelGrid,
    pub pseudo: PseudoGrid,
    pub model: EmulatorModel,
    pub generated_pseudo: PseudoGrid,
    pub generated: MaximaGrid,
    pub ablation: Option<MaximaGrid>,
}

/// Full pipeline on maxima: split, fit margins, normalise, train, sample,
/// back-transform. Errors carry the stage at which they occurred.
pub fn run_evtgan(maxima: &MaximaGrid, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let (train, test) = maxima.split(cfg.n_train).map_err(|e| e.at_stage("split"))?;
    let margins = fit_margins(&train).map_err(|e| e.at_stage("fit margins"))?;
    let pseudo = cfg
        .normalization
        .apply(&train, &margins)
        .map_err(|e| e.at_stage("normalize"))?;
    let model = train_evtgan(&pseudo, &cfg.train)
        .map_err(|e| e.at_stage("train"))?
        .with_margins(margins.clone())?;
    let mut generated_pseudo =
        sample_emulator(&model, cfg.n_star, cfg.sample_seed).map_err(|e| e.at_stage("sample"))?;
    if cfg.rerank {
        generated_pseudo = rerank(&generated_pseudo).map_err(|e| e.at_stage("sample"))?;
    }
    let generated =
        inverse_transform(&generated_pseudo, &margins, train.variable()).map_err(|e| e.at_stage("back-transform"))?;
    let ablation = if cfg.ablation {
        Some(
            EmpiricalMargins::from_maxima(&train)
                .inverse_transform(&generated_pseudo, train.variable())
                .map_err(|e| e.at_stage("back-transform"))?,
        )
    } else {
        None
    };
    Ok(PipelineOutput {
        train,
        test,
        margins,
        pseudo,
        model,
        generated_pseudo,
        generated,
        ablation,
    })
}
