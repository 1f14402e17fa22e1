//! Evaluation tables behind the χ scatter, spectral, trace and GEV figures,
//! and their CSV/SVG emission.

use std::path::Path;

use evtgan::brown_resnick::{br_spectral_density, fit_br, fractal_variogram, SiteGeometry};
use evtgan::dependence::{chi_l2_error, chi_matrix, spectral_for_pair, ChiError, ChiMatrix, Site};
use evtgan::grid::PseudoGrid;
use evtgan::margins::MarginalModelGrid;
use evtgan::pipeline::{rerank, sample_emulator, EmulatorModel};
use evtgan::registry::{dependence_models, ChiContext};
use evtgan::special::integrate;
use evtgan::Error;

use crate::error::{CliError, CliResult};
use crate::output::Outputs;
use crate::svg::{self, Series};
use crate::tables::{self, num, opt, Table, TraceRow};

/// Data shared by the χ and spectral evaluations.
pub struct EvalContext {
    pub train: PseudoGrid,
    pub test: PseudoGrid,
    pub pairs: Vec<(Site, Site)>,
    pub geometry: SiteGeometry,
    pub q: f64,
    pub seed: u64,
    pub n_samples: usize,
    pub model: Option<EmulatorModel>,
}

impl EvalContext {
    fn chi_context(&self) -> ChiContext<'_> {
        ChiContext {
            train: &self.train,
            geometry: &self.geometry,
            pairs: &self.pairs,
            q: self.q,
            n_samples: self.n_samples,
            seed: self.seed,
            emulator: self.model.as_ref(),
        }
    }

    fn width(&self) -> usize {
        self.train.shape().1
    }
}

/// Registry names of the models compared against test χ, with the column
/// suffix used in the scatter table.
const CHI_SOURCES: [(&str, &str); 4] = [
    ("train-empirical", "train"),
    ("evtgan", "evtgan"),
    ("brown-resnick", "br"),
    ("independence", "independence"),
];

pub struct ChiScatter {
    pub q: f64,
    pub seed: u64,
    pub width: usize,
    pub distances: Vec<f64>,
    pub test: ChiMatrix,
    /// `(column suffix, estimates)` for every available model.
    pub models: Vec<(&'static str, ChiMatrix)>,
    /// `||chi_model - chi_test||` per model.
    pub summary: Vec<(&'static str, ChiError)>,
}

pub fn build_chi_scatter(ctx: &EvalContext) -> CliResult<ChiScatter> {
    let test = chi_matrix(&ctx.test, &ctx.pairs, ctx.q)?;
    let registry = dependence_models();
    let cctx = ctx.chi_context();
    let mut models = Vec::new();
    let mut summary = Vec::new();
    for (name, column) in CHI_SOURCES {
        if name == "evtgan" && ctx.model.is_none() {
            log::info!("no model given; skipping the evtgan column");
            continue;
        }
        let chi = registry.get(name)?.chi(&cctx)?;
        summary.push((column, chi_l2_error(&chi, &test)?));
        models.push((column, chi));
    }
    let distances = ctx
        .pairs
        .iter()
        .map(|&(a, b)| ctx.geometry.distance(a, b))
        .collect::<evtgan::Result<Vec<_>>>()?;
    Ok(ChiScatter {
        q: ctx.q,
        seed: ctx.seed,
        width: ctx.width(),
        distances,
        test,
        models,
        summary,
    })
}

impl ChiScatter {
    fn model(&self, column: &str) -> Option<&ChiMatrix> {
        self.models.iter().find(|(c, _)| *c == column).map(|(_, m)| m)
    }

    pub fn has_emulator(&self) -> bool {
        self.model("evtgan").is_some()
    }

    /// One row per pair: test χ against train, emulator and Brown–Resnick χ.
    pub fn scatter_csv(&self) -> CliResult<Vec<u8>> {
        let mut t = Table::new(&[
            "i_row",
            "i_col",
            "j_row",
            "j_col",
            "distance",
            "chi_test",
            "chi_train",
            "chi_evtgan",
            "chi_br",
            "q",
            "seed",
        ])?;
        let col = |name: &str, k: usize| opt(self.model(name).and_then(|m| m.chi[k]));
        for (k, &(a, b)) in self.test.pairs.iter().enumerate() {
            t.row([
                a.0.to_string(),
                a.1.to_string(),
                b.0.to_string(),
                b.1.to_string(),
                num(self.distances[k]),
                opt(self.test.chi[k]),
                col("train", k),
                col("evtgan", k),
                col("br", k),
                num(self.q),
                self.seed.to_string(),
            ])?;
        }
        t.into_bytes()
    }

    pub fn long_csv(&self) -> CliResult<Vec<u8>> {
        let mut sources = vec![("test", &self.test)];
        sources.extend(self.models.iter().map(|(c, m)| (*c, m)));
        tables::chi_long_table(&sources, self.width, self.seed)
    }

    pub fn summary_csv(&self) -> CliResult<Vec<u8>> {
        let mut t = Table::new(&["source", "c_te", "pairs_used", "pairs_skipped", "q", "seed"])?;
        for (name, e) in &self.summary {
            t.row([
                name.to_string(),
                num(e.value),
                e.used.to_string(),
                e.skipped.to_string(),
                num(self.q),
                self.seed.to_string(),
            ])?;
        }
        t.into_bytes()
    }

    pub fn svg(&self) -> String {
        let series: Vec<Series> = ["train", "evtgan", "br"]
            .into_iter()
            .filter_map(|c| {
                let m = self.model(c)?;
                let points = self
                    .test
                    .chi
                    .iter()
                    .zip(&m.chi)
                    .filter_map(|(t, v)| Some((t.as_ref().copied()?, v.as_ref().copied()?)))
                    .collect();
                Some(Series {
                    label: c.to_string(),
                    points,
                })
            })
            .collect();
        svg::unit_scatter(&format!("extremal correlation, q = {}", self.q), "chi (test)", "chi (model)", &series)
    }
}

pub struct SpectralPair {
    pub label: String,
    pub pair: (Site, Site),
    /// Variogram value of the fitted Brown–Resnick model at the pair distance.
    pub br_lambda: Option<f64>,
    /// `(source, angles)`; sources with too few extremes are left out.
    pub samples: Vec<(&'static str, Vec<f64>)>,
}

pub struct SpectralTables {
    pub radius_quantile: f64,
    pub bins: usize,
    pub seed: u64,
    pub width: usize,
    pub pairs: Vec<SpectralPair>,
}

/// The pairs with the smallest, median and largest defined test χ.
pub fn default_spectral_pairs(ctx: &EvalContext) -> CliResult<Vec<(String, (Site, Site))>> {
    let test = chi_matrix(&ctx.test, &ctx.pairs, ctx.q)?;
    let mut defined: Vec<_> = test.defined().collect();
    if defined.len() < 3 {
        return Err(Error::InsufficientExceedances(format!(
            "only {} site pairs have a defined test chi; need 3 to pick weak/mild/strong pairs",
            defined.len()
        ))
        .into());
    }
    defined.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let pick = [0, defined.len() / 2, defined.len() - 1];
    Ok(["weak", "mild", "strong"]
        .into_iter()
        .zip(pick)
        .map(|(l, k)| (l.to_string(), defined[k].0))
        .collect())
}

pub fn build_spectral(
    ctx: &EvalContext,
    pairs: &[(String, (Site, Site))],
    radius_quantile: f64,
    bins: usize,
) -> CliResult<SpectralTables> {
    let br = match fit_br(&chi_matrix(&ctx.train, &ctx.pairs, ctx.q)?, &ctx.geometry) {
        Ok(fit) => Some(fit.params),
        Err(e) => {
            log::warn!("Brown-Resnick fit unavailable: {e}");
            None
        }
    };
    let generated = match &ctx.model {
        Some(m) => Some(rerank(&sample_emulator(m, ctx.n_samples, ctx.seed)?)?),
        None => None,
    };
    let mut out = Vec::new();
    for (label, pair) in pairs {
        let (a, b) = *pair;
        let br_lambda = match &br {
            Some(p) => Some(fractal_variogram(ctx.geometry.distance(a, b)?, p)?),
            None => None,
        };
        let mut samples = Vec::new();
        let sources: [(&'static str, Option<&PseudoGrid>); 3] =
            [("test", Some(&ctx.test)), ("train", Some(&ctx.train)), ("evtgan", generated.as_ref())];
        for (name, grid) in sources {
            let Some(grid) = grid else { continue };
            let (u, v) = (grid.site_series(a.0, a.1), grid.site_series(b.0, b.1));
            match spectral_for_pair(&u, &v, radius_quantile, *pair) {
                Ok(s) => samples.push((name, s.angles)),
                Err(Error::InsufficientExceedances(m)) => {
                    log::warn!("pair {label}: skipping {name} angles ({m})");
                }
                Err(e) => return Err(e.into()),
            }
        }
        out.push(SpectralPair {
            label: label.clone(),
            pair: *pair,
            br_lambda,
            samples,
        });
    }
    Ok(SpectralTables {
        radius_quantile,
        bins,
        seed: ctx.seed,
        width: ctx.width(),
        pairs: out,
    })
}

/// `(lo, hi)` of `bins` equal-width bins on [0, 1].
pub fn bin_edges(bins: usize) -> Vec<(f64, f64)> {
    (0..bins).map(|k| (k as f64 / bins as f64, (k + 1) as f64 / bins as f64)).collect()
}

/// Counts of angles per bin; the last bin is closed.
pub fn bin_counts(angles: &[f64], bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for &a in angles {
        let k = ((a * bins as f64) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
}

/// Bin average of the Hüsler–Reiss spectral density.
pub fn br_bin_density(lambda: f64, lo: f64, hi: f64) -> f64 {
    let f = |w: f64| br_spectral_density(w, lambda).unwrap_or(0.0);
    integrate(&f, lo, hi, 1e-10) / (hi - lo)
}

impl SpectralTables {
    pub fn angles_csv(&self) -> CliResult<Vec<u8>> {
        let mut t = Table::new(&["pair", "i", "j", "source", "radius_quantile", "seed", "angle"])?;
        for p in &self.pairs {
            let (i, j) = (tables::site_index(p.pair.0, self.width), tables::site_index(p.pair.1, self.width));
            for (source, angles) in &p.samples {
                for &a in angles {
                    t.row([
                        p.label.clone(),
                        i.to_string(),
                        j.to_string(),
                        source.to_string(),
                        num(self.radius_quantile),
                        self.seed.to_string(),
                        num(a),
                    ])?;
                }
            }
        }
        t.into_bytes()
    }

    pub fn hist_csv(&self) -> CliResult<Vec<u8>> {
        let mut t = Table::new(&[
            "pair",
            "i",
            "j",
            "source",
            "bin",
            "bin_lo",
            "bin_hi",
            "count",
            "density",
            "br_density",
            "radius_quantile",
            "seed",
        ])?;
        let edges = bin_edges(self.bins);
        for p in &self.pairs {
            let (i, j) = (tables::site_index(p.pair.0, self.width), tables::site_index(p.pair.1, self.width));
            let br: Vec<Option<f64>> = edges
                .iter()
                .map(|&(lo, hi)| p.br_lambda.map(|l| br_bin_density(l, lo, hi)))
                .collect();
            for (source, angles) in &p.samples {
                let counts = bin_counts(angles, self.bins);
                for (k, (&(lo, hi), &c)) in edges.iter().zip(&counts).enumerate() {
                    t.row([
                        p.label.clone(),
                        i.to_string(),
                        j.to_string(),
                        source.to_string(),
                        k.to_string(),
                        num(lo),
                        num(hi),
                        c.to_string(),
                        num(c as f64 / (angles.len() as f64 * (hi - lo))),
                        opt(br[k]),
                        num(self.radius_quantile),
                        self.seed.to_string(),
                    ])?;
                }
            }
        }
        t.into_bytes()
    }

    /// One histogram figure per pair, labelled by the pair label.
    pub fn svgs(&self) -> Vec<(String, String)> {
        let edges = bin_edges(self.bins);
        self.pairs
            .iter()
            .map(|p| {
                let series: Vec<Series> = p
                    .samples
                    .iter()
                    .map(|(source, angles)| {
                        let counts = bin_counts(angles, self.bins);
                        Series {
                            label: source.to_string(),
                            points: edges
                                .iter()
                                .zip(counts)
                                .map(|(&(lo, hi), c)| ((lo + hi) / 2.0, c as f64 / (angles.len() as f64 * (hi - lo))))
                                .collect(),
                        }
                    })
                    .collect();
                let reference = p.br_lambda.map(|l| Series {
                    label: "brown-resnick".into(),
                    points: (1..200)
                        .map(|k| {
                            let w = k as f64 / 200.0;
                            (w, br_spectral_density(w, l).unwrap_or(f64::NAN))
                        })
                        .collect(),
                });
                let title = format!(
                    "spectral angles, {} pair {:?}-{:?}, radius quantile {}",
                    p.label, p.pair.0, p.pair.1, self.radius_quantile
                );
                (p.label.clone(), svg::histogram(&title, &edges, &series, reference.as_ref()))
            })
            .collect()
    }
}

pub fn trace_svg(rows: &[TraceRow], title: &str) -> String {
    let mut series = vec![Series {
        label: "C_tr".into(),
        points: rows.iter().map(|r| (r.epoch as f64, r.c_tr)).collect(),
    }];
    if rows.iter().any(|r| r.c_te.is_some()) {
        series.push(Series {
            label: "C_te".into(),
            points: rows.iter().filter_map(|r| Some((r.epoch as f64, r.c_te?))).collect(),
        });
    }
    svg::line_plot(title, "epoch", "l2 chi error", &series)
}

pub fn trace_rows_csv(rows: &[TraceRow]) -> CliResult<Vec<u8>> {
    let mut t = Table::new(&["epoch", "c_tr", "c_te"])?;
    for r in rows {
        t.row([r.epoch.to_string(), num(r.c_tr), opt(r.c_te)])?;
    }
    t.into_bytes()
}

/// Everything behind the evaluation figures.
#[derive(Default)]
pub struct EvalReport {
    pub chi: Option<ChiScatter>,
    pub spectral: Option<SpectralTables>,
    pub traces: Option<Vec<TraceRow>>,
    pub gev: Option<MarginalModelGrid>,
}

impl EvalReport {
    /// Names of tables that are absent.
    pub fn missing(&self) -> Vec<&'static str> {
        let mut m = Vec::new();
        match &self.chi {
            None => m.push("chi_scatter"),
            Some(c) if !c.has_emulator() => m.push("chi_scatter.chi_evtgan (needs --model)"),
            Some(_) => {}
        }
        if self.spectral.is_none() {
            m.push("spectral");
        }
        if self.traces.is_none() {
            m.push("traces (needs --trace)");
        }
        if self.gev.is_none() {
            m.push("gev_params");
        }
        m
    }

    /// Write the bundle into `dir`. An incomplete report is an error naming
    /// the missing tables, and nothing is written.
    pub fn emit(&self, dir: &Path, out: &mut Outputs) -> CliResult<()> {
        let missing = self.missing();
        if !missing.is_empty() {
            return Err(CliError::Usage(format!("incomplete report; missing tables: {}", missing.join(", "))));
        }
        let (Some(chi), Some(spectral), Some(traces), Some(gev)) = (&self.chi, &self.spectral, &self.traces, &self.gev)
        else {
            unreachable!("checked above")
        };
        out.write(&dir.join("chi_scatter.csv"), &chi.scatter_csv()?)?;
        out.write(&dir.join("chi_long.csv"), &chi.long_csv()?)?;
        out.write(&dir.join("chi_summary.csv"), &chi.summary_csv()?)?;
        out.write(&dir.join("chi_scatter.svg"), chi.svg().as_bytes())?;
        out.write(&dir.join("spectral_angles.csv"), &spectral.angles_csv()?)?;
        out.write(&dir.join("spectral_hist.csv"), &spectral.hist_csv()?)?;
        for (label, s) in spectral.svgs() {
            out.write(&dir.join(format!("spectral_{label}.svg")), s.as_bytes())?;
        }
        out.write(&dir.join("trace.csv"), &trace_rows_csv(traces)?)?;
        out.write(&dir.join("trace.svg"), trace_svg(traces, "chi error during training").as_bytes())?;
        out.write(&dir.join("gev_params.csv"), &tables::gev_table(gev)?)?;
        Ok(())
    }
}
