//! Command-line surface and config-file merging. A TOML config file holds
//! one table per command (`[train]`, `[experiment.sensitivity]`, ...) whose
//! keys are flag names; flags given on the command line take precedence.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const OUT_DIR_ENV: &str = "EVTGAN_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "evtgan", version, about = "GEV margins + GAN dependence emulator for gridded block maxima")]
#[command(args_override_self = true)]
pub struct Cli {
    /// TOML file with per-command defaults; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory against which relative output paths are resolved.
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    pub out_dir: Option<PathBuf>,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic grid of block maxima with known margins and dependence.
    Synth(SynthArgs),
    /// Fit a GEV distribution at every site.
    FitGev(FitGevArgs),
    /// Train the emulator on the first n-train observations.
    Train(TrainArgs),
    /// Draw fields from a trained emulator.
    Sample(SampleArgs),
    /// Compare extremal correlations of test data with train, emulator and Brown–Resnick.
    EvalChi(EvalChiArgs),
    /// Spectral angle samples and histograms for selected site pairs.
    EvalSpectral(EvalSpectralArgs),
    /// Fit the Brown–Resnick fractal variogram to empirical extremal correlations.
    FitBr(FitBrArgs),
    /// Contrast GEV and empirical back-transformation of the same generator.
    AblateDcgan(AblateArgs),
    /// Write the full evaluation bundle (tables and SVG figures).
    Report(ReportArgs),
    /// Multi-run experiments.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCommand {
    /// Emulator χ error traces for several training-set sizes.
    Sensitivity(SensitivityArgs),
}

impl Command {
    /// Config-file table path for this command.
    pub fn section(&self) -> Vec<&'static str> {
        match self {
            Command::Synth(_) => vec!["synth"],
            Command::FitGev(_) => vec!["fit-gev"],
            Command::Train(_) => vec!["train"],
            Command::Sample(_) => vec!["sample"],
            Command::EvalChi(_) => vec!["eval-chi"],
            Command::EvalSpectral(_) => vec!["eval-spectral"],
            Command::FitBr(_) => vec!["fit-br"],
            Command::AblateDcgan(_) => vec!["ablate-dcgan"],
            Command::Report(_) => vec!["report"],
            Command::Experiment(ExperimentCommand::Sensitivity(_)) => vec!["experiment", "sensitivity"],
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthParams {
    /// Dependence generator: gauss_copula, hr_pairs or mixed.
    #[arg(long, default_value = "gauss_copula")]
    pub kind: String,
    #[arg(long, default_value_t = 8)]
    pub height: usize,
    #[arg(long, default_value_t = 8)]
    pub width: usize,
    /// Number of observations.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,
    /// GEV shape in the first column; shapes vary linearly to --xi-right.
    #[arg(long, default_value_t = -0.15, allow_negative_numbers = true)]
    pub xi_left: f64,
    #[arg(long, default_value_t = 0.25, allow_negative_numbers = true)]
    pub xi_right: f64,
    /// Correlation range of the Gaussian field (grid cells).
    #[arg(long, default_value_t = 4.0)]
    pub range: f64,
    /// Hüsler–Reiss parameter of paired sites.
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    /// Weight of the Hüsler–Reiss component in the max-mixture.
    #[arg(long, default_value_t = 0.5)]
    pub weight: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[command(flatten)]
    pub params: SynthParams,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write an obs,row,col,value CSV next to the grid.
    #[arg(long)]
    pub csv: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitGevArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Fit only the first n observations.
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GanParams {
    #[arg(long, default_value_t = 30_000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 2e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 50)]
    pub batch: usize,
    /// EMA weight of the generator parameter average.
    #[arg(long, default_value_t = 0.9)]
    pub ema: f64,
    /// Discriminator updates per generator update.
    #[arg(long, default_value_t = 2)]
    pub disc_steps: usize,
    #[arg(long, default_value_t = 100)]
    pub latent_dim: usize,
    /// Divide all channel counts of the standard stack by this factor.
    #[arg(long, default_value_t = 1)]
    pub width_factor: usize,
}

impl GanParams {
    pub fn config(&self, seed: u64) -> evtgan::nnet::GanConfig {
        evtgan::nnet::GanConfig {
            learning_rate: self.lr,
            batch_size: self.batch,
            epochs: self.epochs,
            disc_steps_per_gen_step: self.disc_steps,
            ema_alpha: self.ema,
            latent_dim: self.latent_dim,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub n_train: usize,
    #[command(flatten)]
    pub gan: GanParams,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Margin normalisation before training: empirical or gev.
    #[arg(long, default_value = "empirical")]
    pub normalization: String,
    /// Epoch interval of the χ error trace; 0 disables it.
    #[arg(long, default_value_t = 500)]
    pub trace_every: usize,
    #[arg(long, default_value_t = 0.95)]
    pub q: f64,
    /// Number of random site pairs in the χ trace.
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
    /// Generated fields per trace evaluation; defaults to the held-out size.
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// GEV parameter CSV from fit-gev; without it pseudo-uniform fields are written.
    #[arg(long)]
    pub margins: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Re-rank generated fields to exactly uniform margins first.
    #[arg(long)]
    pub rerank: bool,
    #[arg(long, default_value = "emulated")]
    pub variable: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalParams {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub n_train: usize,
    /// Trained emulator checkpoint.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.95)]
    pub q: f64,
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Generated fields per model evaluation; defaults to the test-set size.
    #[arg(long)]
    pub n_samples: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalChiArgs {
    #[command(flatten)]
    pub eval: EvalParams,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpectralParams {
    #[arg(long, default_value_t = 0.95)]
    pub radius_quantile: f64,
    /// Site pair `row,col,row,col`; repeatable. Defaults to the weakest,
    /// median and strongest test-χ pairs among the sampled pairs.
    #[arg(long = "pair")]
    pub pair: Vec<String>,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalSpectralArgs {
    #[command(flatten)]
    pub eval: EvalParams,
    #[command(flatten)]
    pub spectral: SpectralParams,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitBrArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub n_train: usize,
    #[arg(long, default_value_t = 0.95)]
    pub q: f64,
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AblateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub n_train: usize,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    #[command(flatten)]
    pub eval: EvalParams,
    #[command(flatten)]
    pub spectral: SpectralParams,
    /// χ trace CSV written by `train`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Output directory of the bundle.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SensitivityArgs {
    /// Existing maxima grid; a synthetic one is generated per seed otherwise.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub synth: SynthParams,
    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Set, default_values_t = [30, 50, 100])]
    pub n_train: Vec<usize>,
    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Set, default_values_t = [0, 1, 2, 3, 4])]
    pub seeds: Vec<u64>,
    #[command(flatten)]
    pub gan: GanParams,
    #[arg(long, default_value_t = 500)]
    pub trace_every: usize,
    #[arg(long, default_value_t = 0.95)]
    pub q: f64,
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
    /// Generated fields per trace evaluation; defaults to the held-out size.
    #[arg(long)]
    pub n_samples: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn toml_scalar(v: &toml::Value) -> CliResult<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        other => return Err(CliError::Usage(format!("unsupported config value {other}"))),
    })
}

/// Flags equivalent to one config table.
pub fn config_flags(table: &toml::Table) -> CliResult<Vec<String>> {
    let mut out = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            toml::Value::Table(_) => continue,
            toml::Value::Boolean(true) => out.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                if key == "pair" {
                    for item in items {
                        out.push(flag.clone());
                        out.push(toml_scalar(item)?);
                    }
                } else {
                    let joined = items.iter().map(toml_scalar).collect::<CliResult<Vec<_>>>()?.join(",");
                    out.push(flag);
                    out.push(joined);
                }
            }
            v => {
                out.push(flag);
                out.push(toml_scalar(v)?);
            }
        }
    }
    Ok(out)
}

fn load_section(path: &Path, section: &[&str]) -> CliResult<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    for name in section {
        table = match table.remove(*name) {
            Some(toml::Value::Table(t)) => t,
            Some(_) => return Err(CliError::Usage(format!("config key '{name}' must be a table"))),
            None => return Ok(toml::Table::new()),
        };
    }
    Ok(table)
}

/// Parse `argv`, folding in the config file's table for the chosen command
/// ahead of the explicit flags so the latter win.
pub fn parse(argv: Vec<String>) -> Result<Cli, clap::Error> {
    let first = Cli::try_parse_from(&argv)?;
    let Some(config) = first.config.clone() else {
        return Ok(first);
    };
    let section = first.command.section();
    let table = match load_section(&config, &section) {
        Ok(t) => t,
        Err(e) => {
            return Err(clap::Error::raw(clap::error::ErrorKind::InvalidValue, format!("{e}\n")));
        }
    };
    let flags = match config_flags(&table) {
        Ok(f) => f,
        Err(e) => return Err(clap::Error::raw(clap::error::ErrorKind::InvalidValue, format!("{e}\n"))),
    };
    if flags.is_empty() {
        return Ok(first);
    }
    let last = section.last().copied().unwrap_or_default();
    let at = argv
        .iter()
        .position(|a| a == last)
        .map(|i| i + 1)
        .unwrap_or(argv.len());
    let mut merged = argv[..at].to_vec();
    merged.extend(flags);
    merged.extend_from_slice(&argv[at..]);
    Cli::try_parse_from(merged)
}

/// Resolve a relative output path against the output directory.
pub fn resolve_out(out_dir: Option<&Path>, path: &Path) -> PathBuf {
    match out_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn train_defaults_match_published_setup() {
        let cli = parse(argv("evtgan train --in g --out m")).unwrap();
        let Command::Train(t) = cli.command else { panic!() };
        assert_eq!(t.n_train, 50);
        assert_eq!(t.gan.epochs, 30_000);
        assert_eq!(t.gan.lr, 2e-4);
        assert_eq!(t.gan.batch, 50);
        assert_eq!(t.gan.ema, 0.9);
        assert_eq!(t.gan.disc_steps, 2);
        assert_eq!(t.gan.latent_dim, 100);
    }

    #[test]
    fn sample_default_count() {
        let cli = parse(argv("evtgan sample --model m --out s")).unwrap();
        let Command::Sample(s) = cli.command else { panic!() };
        assert_eq!(s.n, 10_000);
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        std::fs::write(
            &cfg,
            "[train]\nepochs = 7\nbatch = 10\nnormalization = \"gev\"\n[experiment.sensitivity]\nn_train = [40, 60]\n",
        )
        .unwrap();
        let c = cfg.display().to_string();
        let cli = parse(argv(&format!("evtgan --config {c} train --in g --out m --batch 20"))).unwrap();
        let Command::Train(t) = cli.command else { panic!() };
        assert_eq!((t.gan.epochs, t.gan.batch, t.normalization.as_str()), (7, 20, "gev"));
        let cli = parse(argv(&format!("evtgan experiment --config {c} sensitivity --out d"))).unwrap();
        let Command::Experiment(ExperimentCommand::Sensitivity(s)) = cli.command else { panic!() };
        assert_eq!(s.n_train, vec![40, 60]);
        let cli = parse(argv(&format!("evtgan --config {c} experiment sensitivity --out d --n-train 5"))).unwrap();
        let Command::Experiment(ExperimentCommand::Sensitivity(s)) = cli.command else { panic!() };
        assert_eq!(s.n_train, vec![5]);
    }

    #[test]
    fn unknown_flags_are_usage_errors() {
        let e = parse(argv("evtgan train --in g --out m --bogus 1")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
