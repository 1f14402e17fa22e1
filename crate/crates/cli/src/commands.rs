//! One function per subcommand. Each validates its arguments, delegates to
//! the library and records inputs and artifacts in a manifest.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use evtgan::brown_resnick::{br_chi_at, fit_br, SiteGeometry};
use evtgan::dependence::{chi_matrix, sample_site_pairs, Site};
use evtgan::experiment::{evaluate_run, majority, non_increasing, RunOptions, RunResult, MIN_OBSERVATIONS};
use evtgan::grid::{write_grid_csv, MaximaGrid, PseudoGrid};
use evtgan::margins::{
    check_failure_share, fit_sites, inverse_transform, to_pseudo_obs, EmpiricalMargins, MarginalModelGrid,
};
use evtgan::gev::FitOptions;
use evtgan::nnet::Checkpoint;
use evtgan::pipeline::{
    rerank, sample_emulator, train_evtgan, EmulatorModel, Normalization, TraceOptions, TrainOptions,
};
use evtgan::registry::synthetic_generators;
use evtgan::synthetic::{make_synthetic, MarginSpec, SyntheticSpec};

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::output::{with_suffix, Outputs};
use crate::report::{self, build_chi_scatter, build_spectral, default_spectral_pairs, EvalContext, EvalReport};
use crate::tables::{self, num, opt, read_trace_table, Table};

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    let dir = cli.out_dir.as_deref();
    match &cli.command {
        Command::Synth(a) => synth(a, dir),
        Command::FitGev(a) => fit_gev(a, dir),
        Command::Train(a) => train(a, dir),
        Command::Sample(a) => sample(a, dir),
        Command::EvalChi(a) => eval_chi(a, dir),
        Command::EvalSpectral(a) => eval_spectral(a, dir),
        Command::FitBr(a) => fit_br_cmd(a, dir),
        Command::AblateDcgan(a) => ablate(a, dir),
        Command::Report(a) => report_cmd(a, dir),
        Command::Experiment(ExperimentCommand::Sensitivity(a)) => sensitivity(a, dir),
    }
}

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn check(cond: bool, msg: &str) -> CliResult<()> {
    if cond {
        Ok(())
    } else {
        usage(msg)
    }
}

fn check_q(name: &str, q: f64) -> CliResult<()> {
    check(q > 0.0 && q < 1.0, &format!("--{name} must lie strictly between 0 and 1"))
}

fn check_gan(g: &GanParams) -> CliResult<()> {
    check(g.epochs >= 1, "--epochs must be >= 1")?;
    check(g.lr > 0.0 && g.lr.is_finite(), "--lr must be positive")?;
    check(g.batch >= 1, "--batch must be >= 1")?;
    check((0.0..1.0).contains(&g.ema), "--ema must lie in [0, 1)")?;
    check(g.disc_steps >= 1, "--disc-steps must be >= 1")?;
    check(g.latent_dim >= 1, "--latent-dim must be >= 1")?;
    check(g.width_factor >= 1, "--width-factor must be >= 1")
}

fn check_synth(p: &SynthParams) -> CliResult<()> {
    check(p.height >= 1 && p.width >= 1, "--height and --width must be >= 1")?;
    check(p.n >= 2, "--n must be >= 2")?;
    check(p.sigma > 0.0, "--sigma must be positive")?;
    check(p.range > 0.0, "--range must be positive")?;
    check(p.lambda > 0.0, "--lambda must be positive")?;
    check((0.0..=1.0).contains(&p.weight), "--weight must lie in [0, 1]")
}

fn check_eval(e: &EvalParams) -> CliResult<()> {
    check(e.n_train >= 2, "--n-train must be >= 2")?;
    check_q("q", e.q)?;
    check(e.pairs >= 1, "--pairs must be >= 1")?;
    check(e.n_samples.map_or(true, |n| n >= 2), "--n-samples must be >= 2")
}

fn check_spectral(s: &SpectralParams) -> CliResult<()> {
    check_q("radius-quantile", s.radius_quantile)?;
    check(s.bins >= 1, "--bins must be >= 1")
}

fn synthetic_spec(p: &SynthParams, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        height: p.height,
        width: p.width,
        n: p.n,
        margins: MarginSpec {
            mu: p.mu,
            sigma: p.sigma,
            xi_left: p.xi_left,
            xi_right: p.xi_right,
        },
        range: p.range,
        lambda: p.lambda,
        weight: p.weight,
        seed,
    }
}

fn grid_bytes(g: &MaximaGrid) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    g.write_to(&mut buf)?;
    Ok(buf)
}

fn pseudo_bytes(g: &PseudoGrid) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    g.write_to(&mut buf)?;
    Ok(buf)
}

fn read_maxima(out: &mut Outputs, path: &Path) -> CliResult<MaximaGrid> {
    let bytes = out.read_input(path)?;
    MaximaGrid::read_from(bytes.as_slice())
        .map_err(|e| CliError::Core(evtgan::Error::Format(format!("{}: {e}", path.display()))))
}

fn read_model(out: &mut Outputs, path: &Path) -> CliResult<EmulatorModel> {
    let bytes = out.read_input(path)?;
    let ck = Checkpoint::read_from(&mut bytes.as_slice())?;
    Ok(EmulatorModel::from_checkpoint(&ck)?)
}

fn synth(a: &SynthArgs, dir: Option<&Path>) -> CliResult<()> {
    check_synth(&a.params)?;
    let out_path = crate::args::resolve_out(dir, &a.out);
    let generator = synthetic_generators().get(&a.params.kind)?;
    let grid = make_synthetic(&*generator, &synthetic_spec(&a.params, a.seed))?;
    let mut out = Outputs::new();
    out.write(&out_path, &grid_bytes(&grid)?)?;
    if a.csv {
        let mut buf = Vec::new();
        write_grid_csv(&mut buf, grid.data())?;
        out.write(&with_suffix(&out_path, "csv"), &buf)?;
    }
    out.finish("synth", a, Some(a.seed), &out_path)?;
    Ok(())
}

fn fit_gev(a: &FitGevArgs, dir: Option<&Path>) -> CliResult<()> {
    let out_path = crate::args::resolve_out(dir, &a.out);
    let mut out = Outputs::new();
    let mut maxima = read_maxima(&mut out, &a.input)?;
    if let Some(n) = a.n_train {
        check(n >= 2 && n <= maxima.n(), "--n-train must lie in [2, number of observations]")?;
        if n < maxima.n() {
            maxima = maxima.split(n)?.0;
        }
    }
    let margins = fit_sites(&maxima, &FitOptions::default(), true)?;
    out.write(&out_path, &tables::gev_table(&margins)?)?;
    out.finish("fit-gev", a, None, &out_path)?;
    check_failure_share(&margins)?;
    Ok(())
}

fn train(a: &TrainArgs, dir: Option<&Path>) -> CliResult<()> {
    check_gan(&a.gan)?;
    check(a.n_train >= 2, "--n-train must be >= 2")?;
    check_q("q", a.q)?;
    check(a.pairs >= 1, "--pairs must be >= 1")?;
    let normalization = Normalization::from_name(&a.normalization)?;
    let out_path = crate::args::resolve_out(dir, &a.out);
    let mut out = Outputs::new();
    let maxima = read_maxima(&mut out, &a.input)?;
    let (train, test) = maxima.split(a.n_train)?;
    let margins = fit_sites(&train, &FitOptions::default(), true)?;
    check_failure_share(&margins).map_err(|e| e.at_stage("fit margins"))?;
    let pseudo = normalization.apply(&train, &margins).map_err(|e| e.at_stage("normalize"))?;
    let (h, w) = maxima.shape();
    let trace = if a.trace_every > 0 {
        Some(TraceOptions {
            every: a.trace_every,
            q: a.q,
            pairs: sample_site_pairs(h, w, a.pairs, a.seed)?,
            test: Some(to_pseudo_obs(&test)?),
            n_samples: a.n_samples.unwrap_or(test.n()),
            sample_seed: a.seed,
        })
    } else {
        None
    };
    let opts = TrainOptions {
        gan: a.gan.config(a.seed),
        width_factor: a.gan.width_factor,
        trace,
    };
    let model = train_evtgan(&pseudo, &opts)
        .map_err(|e| e.at_stage("train"))?
        .with_margins(margins.clone())?;
    out.write(&out_path, &model.to_checkpoint().to_bytes())?;
    let mut losses = Table::new(&["epoch", "disc", "gen"])?;
    for l in model.losses() {
        losses.row([l.epoch.to_string(), num(l.disc), num(l.gen)])?;
    }
    out.write(&with_suffix(&out_path, "losses.csv"), &losses.into_bytes()?)?;
    if a.trace_every > 0 {
        out.write(
            &with_suffix(&out_path, "trace.csv"),
            &tables::trace_table(model.trace(), a.n_train, a.q, a.seed)?,
        )?;
    }
    out.write(&with_suffix(&out_path, "gev.csv"), &tables::gev_table(&margins)?)?;
    out.finish("train", a, Some(a.seed), &out_path)?;
    Ok(())
}

fn sample(a: &SampleArgs, dir: Option<&Path>) -> CliResult<()> {
    check(a.n >= 1, "--n must be >= 1")?;
    let out_path = crate::args::resolve_out(dir, &a.out);
    let mut out = Outputs::new();
    let model = read_model(&mut out, &a.model)?;
    let margins = match &a.margins {
        Some(p) => Some(tables::read_gev_table(&out.read_input(p)?)?),
        None => model.margins().cloned(),
    };
    let mut pseudo = sample_emulator(&model, a.n, a.seed)?;
    if a.rerank {
        pseudo = rerank(&pseudo)?;
    }
    let bytes = match &margins {
        Some(m) => grid_bytes(&inverse_transform(&pseudo, m, &a.variable).map_err(|e| e.at_stage("back-transform"))?)?,
        None => {
            log::warn!("no margins available; writing pseudo-uniform fields");
            pseudo_bytes(&pseudo)?
        }
    };
    out.write(&out_path, &bytes)?;
    out.finish("sample", a, Some(a.seed), &out_path)?;
    Ok(())
}

fn eval_context(e: &EvalParams, out: &mut Outputs) -> CliResult<(EvalContext, MaximaGrid)> {
    check_eval(e)?;
    let maxima = read_maxima(out, &e.input)?;
    let (train, test) = maxima.split(e.n_train)?;
    let (h, w) = maxima.shape();
    let model = match &e.model {
        Some(p) => {
            let m = read_model(out, p)?;
            if m.shape() != (h, w) {
                return Err(evtgan::Error::Shape(format!("model grid {:?} does not match data {:?}", m.shape(), (h, w))).into());
            }
            Some(m)
        }
        None => None,
    };
    let ctx = EvalContext {
        train: to_pseudo_obs(&train)?,
        pairs: sample_site_pairs(h, w, e.pairs, e.seed)?,
        geometry: SiteGeometry::grid(h, w),
        q: e.q,
        seed: e.seed,
        n_samples: e.n_samples.unwrap_or(test.n()),
        test: to_pseudo_obs(&test)?,
        model,
    };
    Ok((ctx, train))
}

fn eval_chi(a: &EvalChiArgs, dir: Option<&Path>) -> CliResult<()> {
    let out_path = crate::args::resolve_out(dir, &a.out);
    let mut out = Outputs::new();
    let (ctx, _) = eval_context(&a.eval, &mut out)?;
    let chi = build_chi_scatter(&ctx)?;
    out.write(&out_path, &chi.scatter_csv()?)?;
    out.write(&with_suffix(&out_path, "long.csv"), &chi.long_csv()?)?;
    out.write(&with_suffix(&out_path, "summary.csv"), &chi.summary_csv()?)?;
    out.write(&with_suffix(&out_path, "svg"), chi.svg().as_bytes())?;
    out.finish("eval-chi", a, Some(a.eval.seed), &out_path)?;
    Ok(())
}

/// Parse `row,col,row,col`.
pub fn parse_pair(s: &str, shape: (usize, usize)) -> CliResult<(Site, Site)> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--pair '{s}' must be four comma-separated site indices")))?;
    if v.len() != 4 {
        return usage(format!("--pair '{s}' must be row,col,row,col"));
    }
    let (a, b) = ((v[0], v[1]), (v[2], v[3]));
    for (r, c) in [a, b] {
        if r >= shape.0 || c >= shape.1 {
            return usage(format!("--pair '{s}' lies outside the {}x{} grid", shape.0, shape.1));
        }
    }
    if a == b {
        return usage(format!("--pair '{s}' names the same site twice"));
    }
    Ok((a, b))
}

fn spectral_pairs(s: &SpectralParams, ctx: &EvalContext) -> CliResult<Vec<(String, (Site, Site))>> {
    if s.pair.is_empty() {
        return default_spectral_pairs(ctx);
    }
    s.pair
        .iter()
        .enumerate()
        .map(|(k, p)| Ok((format!("pair{k}"), parse_pair(p, ctx.train.shape())?)))
        .collect()
}

fn eval_spectral(a: &EvalSpectralArgs, dir: Option<&Path>) -> CliResult<()> {
    check_spectral(&a.spectral)?;
    let out_path = crate::args::resolve_out(dir, &a.out);
    let mut out = Outputs::new();
    let (ctx, _) = eval_context(&a.eval, &mut out)?;
    let pairs = spectral_pairs(&a.spectral, &ctx)?;
    let tables = build_spectral(&ctx, &pairs, a.spectral.radius_quantile, a.spectral.bins)?;
    out.write(&out_path, &tables.angles_csv()?)?;
    out.write(&with_suffix(&out_path, "hist.csv"), &tables.hist_csv()?)?;
    for (label, svg) in tables.svgs() {
        out.write(&with_suffix(&out_path, &format!("{label}.svg")), svg.as_bytes())?;
    }
    out.finish("eval-spectral", a, Some(a.eval.seed), &out_path)?;
    Ok(())
}

const CURVE_STEP: f64 = 0.1;

fn fit_br_cmd(a: &FitBrArgs, dir: Option<&Path>) -> CliResult<()> {
    check(a.n_train >= 2, "--n-train must be >= 2")?;
    check_q("q", a.q)?;
    check(a.pairs >= 1, "--pairs must be >= 1")?;
    let out_path = crate::args::resolve_out(dir, &a.out);
    let mut out = Outputs::new();
    let maxima = read_maxima(&mut out, &a.input)?;
    let train = if a.n_train < maxima.n() {
        maxima.split(a.n_train)?.0
    } else {
        maxima
    };
    let (h, w) = train.shape();
    let geometry = SiteGeometry::grid(h, w);
    let pairs = sample_site_pairs(h, w, a.pairs, a.seed)?;
    let chi = chi_matrix(&to_pseudo_obs(&train)?, &pairs, a.q)?;
    let fit = fit_br(&chi, &geometry)?;
    let mut t = Table::new(&["alpha", "s", "objective", "pairs_skipped", "converged", "q", "seed"])?;
    t.row([
        num(fit.params.alpha()),
        num(fit.params.s()),
        num(fit.objective),
        fit.skipped.to_string(),
        fit.converged.to_string(),
        num(a.q),
        a.seed.to_string(),
    ])?;
    out.write(&out_path, &t.into_bytes()?)?;
    let max_d = (((h - 1).pow(2) + (w - 1).pow(2)) as f64).sqrt();
    let mut curve = Table::new(&["distance", "chi_br"])?;
    let steps = (max_d / CURVE_STEP).ceil() as usize;
    for k in 1..=steps {
        let d = k as f64 * CURVE_STEP;
        curve.row([num(d), num(br_chi_at(d, &fit.params)?)])?;
    }
    out.write(&with_suffix(&out_path, "curve.csv"), &curve.into_bytes()?)?;
    let mut points = Table::new(&["distance", "chi_empirical", "q", "seed"])?;
    for (&(p1, p2), c) in chi.pairs.iter().zip(&chi.chi) {
        points.row([num(geometry.distance(p1, p2)?), opt(*c), num(a.q), a.seed.to_string()])?;
    }
    out.write(&with_suffix(&out_path, "points.csv"), &points.into_bytes()?)?;
    out.finish("fit-br", a, Some(a.seed), &out_path)?;
    if !fit.converged {
        return Err(evtgan::Error::Quality("variogram fit did not converge".into()).into());
    }
    Ok(())
}

fn ablate(a: &AblateArgs, dir: Option<&Path>) -> CliResult<()> {
    check(a.n >= 1, "--n must be >= 1")?;
    check(a.n_train >= 2, "--n-train must be >= 2")?;
    let out_path = crate::args::resolve_out(dir, &a.out);
    let mut out = Outputs::new();
    let maxima = read_maxima(&mut out, &a.input)?;
    let model = read_model(&mut out, &a.model)?;
    let train = if a.n_train < maxima.n() {
        maxima.split(a.n_train)?.0
    } else {
        maxima
    };
    check(model.shape() == train.shape(), "model and data grids differ")?;
    let margins: MarginalModelGrid = match model.margins() {
        Some(m) => m.clone(),
        None => {
            let m = fit_sites(&train, &FitOptions::default(), true)?;
            check_failure_share(&m)?;
            m
        }
    };
    let pseudo = sample_emulator(&model, a.n, a.seed)?;
    let evt = inverse_transform(&pseudo, &margins, train.variable())?;
    let dcgan = EmpiricalMargins::from_maxima(&train).inverse_transform(&pseudo, train.variable())?;
    let (h, w) = train.shape();
    let mut t = Table::new(&[
        "site_row",
        "site_col",
        "xi",
        "train_max",
        "evtgan_max",
        "dcgan_max",
        "evtgan_exceedances",
        "dcgan_exceedances",
        "n",
        "seed",
    ])?;
    let max = |v: Vec<f64>| v.into_iter().fold(f64::NEG_INFINITY, f64::max);
    for r in 0..h {
        for c in 0..w {
            let tmax = max(train.site_series(r, c));
            let count = |g: &MaximaGrid| g.site_series(r, c).into_iter().filter(|&v| v > tmax).count();
            t.row([
                r.to_string(),
                c.to_string(),
                opt(margins.site(r, c).params().map(|p| p.xi())),
                num(tmax),
                num(max(evt.site_series(r, c))),
                num(max(dcgan.site_series(r, c))),
                count(&evt).to_string(),
                count(&dcgan).to_string(),
                a.n.to_string(),
                a.seed.to_string(),
            ])?;
        }
    }
    out.write(&out_path, &t.into_bytes()?)?;
    out.write(&with_suffix(&out_path, "evtgan.evtgrid"), &grid_bytes(&evt)?)?;
    out.write(&with_suffix(&out_path, "dcgan.evtgrid"), &grid_bytes(&dcgan)?)?;
    out.finish("ablate-dcgan", a, Some(a.seed), &out_path)?;
    Ok(())
}

fn report_cmd(a: &ReportArgs, dir: Option<&Path>) -> CliResult<()> {
    check_spectral(&a.spectral)?;
    let out_dir = crate::args::resolve_out(dir, &a.out);
    let mut out = Outputs::new();
    let (ctx, train_maxima) = eval_context(&a.eval, &mut out)?;
    let mut rep = EvalReport {
        traces: match &a.trace {
            Some(p) => Some(read_trace_table(&out.read_input(p)?)?),
            None => None,
        },
        ..Default::default()
    };
    let mut missing = Vec::new();
    if ctx.model.is_none() {
        missing.push("chi_scatter.chi_evtgan (needs --model)");
    }
    if rep.traces.is_none() {
        missing.push("traces (needs --trace)");
    }
    if !missing.is_empty() {
        return usage(format!("incomplete report; missing tables: {}", missing.join(", ")));
    }
    rep.gev = Some(fit_sites(&train_maxima, &FitOptions::default(), true)?);
    rep.chi = Some(build_chi_scatter(&ctx)?);
    let pairs = spectral_pairs(&a.spectral, &ctx)?;
    rep.spectral = Some(build_spectral(&ctx, &pairs, a.spectral.radius_quantile, a.spectral.bins)?);
    rep.emit(&out_dir, &mut out)?;
    out.finish("report", a, Some(a.eval.seed), &out_dir.join("report"))?;
    Ok(())
}

fn sensitivity(a: &SensitivityArgs, dir: Option<&Path>) -> CliResult<()> {
    check_gan(&a.gan)?;
    check_q("q", a.q)?;
    check(a.pairs >= 1, "--pairs must be >= 1")?;
    check(a.trace_every >= 1, "--trace-every must be >= 1")?;
    check(!a.n_train.is_empty() && !a.seeds.is_empty(), "--n-train and --seeds must be non-empty")?;
    check(a.n_train.iter().all(|&n| n >= 2), "every --n-train must be >= 2")?;
    let out_dir = crate::args::resolve_out(dir, &a.out);
    let mut out = Outputs::new();
    let provided = match &a.input {
        Some(p) => Some(read_maxima(&mut out, p)?),
        None => {
            check_synth(&a.synth)?;
            None
        }
    };
    let datasets: Vec<MaximaGrid> = match provided {
        Some(d) => vec![d; a.seeds.len()],
        None => {
            let generator = synthetic_generators().get(&a.synth.kind)?;
            a.seeds
                .iter()
                .map(|&s| make_synthetic(&*generator, &synthetic_spec(&a.synth, s)))
                .collect::<evtgan::Result<_>>()?
        }
    };
    if let Some(d) = datasets.iter().find(|d| d.n() < MIN_OBSERVATIONS) {
        return Err(evtgan::Error::Shape(format!(
            "sensitivity study needs at least {MIN_OBSERVATIONS} observations, got {}",
            d.n()
        ))
        .into());
    }
    let jobs: Vec<(usize, usize)> = (0..a.seeds.len())
        .flat_map(|s| a.n_train.iter().map(move |&n| (s, n)))
        .collect();
    let results: Vec<RunResult> = jobs
        .par_iter()
        .map(|&(s, n)| {
            let seed = a.seeds[s];
            log::info!("sensitivity run n_train = {n}, seed = {seed}");
            evaluate_run(
                &datasets[s],
                &RunOptions {
                    n_train: n,
                    gan: a.gan.config(seed),
                    width_factor: a.gan.width_factor,
                    trace_every: a.trace_every,
                    q: a.q,
                    n_pairs: a.pairs,
                    pair_seed: seed,
                    sample_seed: seed,
                    n_samples: a.n_samples,
                },
            )
        })
        .collect::<evtgan::Result<_>>()?;
    let mut summary = Table::new(&["n_train", "seed", "final_c_te", "final_c_tr", "benchmark", "independence", "q"])?;
    for r in &results {
        out.write(
            &out_dir.join(format!("trace_n{}_seed{}.csv", r.n_train, r.seed)),
            &tables::trace_table(&r.trace, r.n_train, a.q, r.seed)?,
        )?;
        summary.row([
            r.n_train.to_string(),
            r.seed.to_string(),
            num(r.final_c_te),
            num(r.final_c_tr),
            num(r.benchmark),
            num(r.independence),
            num(a.q),
        ])?;
    }
    out.write(&out_dir.join("summary.csv"), &summary.into_bytes()?)?;
    let mut checks = Table::new(&["seed", "c_te_non_increasing", "largest_n_trace_decreases"])?;
    let mut flags = (Vec::new(), Vec::new());
    let largest = *a.n_train.iter().max().expect("non-empty");
    for &seed in &a.seeds {
        let mut runs: Vec<&RunResult> = results.iter().filter(|r| r.seed == seed).collect();
        runs.sort_by_key(|r| r.n_train);
        let mono = non_increasing(&runs.iter().map(|r| r.final_c_te).collect::<Vec<_>>());
        let big = runs.iter().find(|r| r.n_train == largest).expect("run exists");
        let decreases = match (big.trace.first().and_then(|p| p.c_te), big.trace.last().and_then(|p| p.c_te)) {
            (Some(first), Some(last)) if big.trace.len() > 1 => last.value < first.value,
            _ => false,
        };
        flags.0.push(mono);
        flags.1.push(decreases);
        checks.row([seed.to_string(), mono.to_string(), decreases.to_string()])?;
    }
    checks.row(["majority".to_string(), majority(&flags.0).to_string(), majority(&flags.1).to_string()])?;
    out.write(&out_dir.join("checks.csv"), &checks.into_bytes()?)?;
    let svg = report::trace_svg(
        &results
            .iter()
            .filter(|r| r.seed == a.seeds[0] && r.n_train == largest)
            .flat_map(|r| r.trace.iter())
            .map(|p| tables::TraceRow {
                epoch: p.epoch,
                c_tr: p.c_tr.value,
                c_te: p.c_te.map(|e| e.value),
            })
            .collect::<Vec<_>>(),
        &format!("chi error, n_train = {largest}, seed = {}", a.seeds[0]),
    );
    out.write(&out_dir.join("trace.svg"), svg.as_bytes())?;
    out.finish("experiment sensitivity", a, None, &out_dir.join("summary"))?;
    Ok(())
}

/// Output path used by tests and scripts to find a command's manifest.
pub fn manifest_path(primary: &Path) -> PathBuf {
    with_suffix(primary, "manifest.json")
}
