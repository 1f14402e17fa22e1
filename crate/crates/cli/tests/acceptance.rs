//! Acceptance suite: one PASS/FAIL line per criterion. Set
//! `ACCEPTANCE_ONLY=1,4,8` to run a subset.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use evtgan::brown_resnick::{
    br_chi, br_chi_at, br_spectral_density, fit_br, hr_bivariate_sample, SiteGeometry, VariogramParams,
};
use evtgan::dependence::{chi_empirical, sample_site_pairs, spectral_empirical, ChiMatrix};
use evtgan::experiment::{evaluate_run, majority, non_increasing, RunOptions, RunResult};
use evtgan::gev::{fit_gev_mle, GevParams};
use evtgan::grid::MaximaGrid;
use evtgan::margins::{fit_margins, inverse_transform, EmpiricalMargins};
use evtgan::nnet::activation::ActivationKind;
use evtgan::nnet::gradcheck::check_network;
use evtgan::nnet::{GanArch, GanConfig, LayerSpec, Mode, Sequential, Tensor};
use evtgan::pipeline::{sample_emulator, DEFAULT_N_STAR};
use evtgan::registry::synthetic_generators;
use evtgan::synthetic::{make_synthetic, SyntheticSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------- oracles

/// GEV quantile written out from the distribution function.
fn gev_quantile_oracle(u: f64, mu: f64, sigma: f64, xi: f64) -> f64 {
    let t = -u.ln();
    if xi == 0.0 {
        mu - sigma * t.ln()
    } else {
        mu + sigma * (t.powf(-xi) - 1.0) / xi
    }
}

/// Standard normal CDF by composite Simpson integration of the density.
fn normal_cdf_oracle(x: f64) -> f64 {
    let n = 200_000;
    let (a, b) = (0.0, x.abs());
    let h = (b - a) / n as f64;
    let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = phi(a) + phi(b);
    for k in 1..n {
        s += phi(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    let half = s * h / 3.0;
    if x >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// Extremal coefficient identity for Hüsler–Reiss: chi = 2 (1 - Phi(sqrt(lambda) / 2)).
fn hr_chi_oracle(lambda: f64) -> f64 {
    2.0 * (1.0 - normal_cdf_oracle(lambda.sqrt() / 2.0))
}

// -------------------------------------------------------------- criteria

fn c1_gev_recovery() -> Outcome {
    let truths = [(10.0, 2.0, -0.2), (10.0, 2.0, 0.0), (10.0, 2.0, 0.25)];
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    let mut slowest = 0.0f64;
    let mut failures = Vec::new();
    for &(mu, sigma, xi) in &truths {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let data: Vec<f64> = (0..5000)
                .map(|_| gev_quantile_oracle(rng.gen_range(f64::EPSILON..1.0), mu, sigma, xi))
                .collect();
            let t = Instant::now();
            let fit = match fit_gev_mle(&data) {
                Ok(f) => f,
                Err(e) => {
                    failures.push(format!("xi={xi} seed={seed}: {e}"));
                    continue;
                }
            };
            slowest = slowest.max(t.elapsed().as_secs_f64());
            let p = fit.params;
            let e = ((p.mu() - mu).abs() / mu, (p.sigma() - sigma).abs() / sigma, (p.xi() - xi).abs());
            worst = (worst.0.max(e.0), worst.1.max(e.1), worst.2.max(e.2));
            if e.0 >= 0.05 || e.1 >= 0.05 || e.2 >= 0.05 {
                failures.push(format!("xi={xi} seed={seed}: {e:?}"));
            }
        }
    }
    let pass = failures.is_empty() && slowest < 1.0;
    outcome(
        pass,
        format!(
            "60 fits; max rel err mu {:.4}, sigma {:.4}; max abs err xi {:.4}; slowest fit {:.3}s{}",
            worst.0,
            worst.1,
            worst.2,
            slowest,
            if failures.is_empty() { String::new() } else { format!("; failures {failures:?}") }
        ),
    )
}

fn c2_gradients() -> Outcome {
    const TOL: f64 = 1e-4;
    const SEEDS: u64 = 20;
    let t = Instant::now();
    let conv = |i, o, k, s, p| LayerSpec::Conv {
        in_channels: i,
        out_channels: o,
        kernel: k,
        stride: s,
        padding: p,
    };
    let convt = |i, o, k, s, p| LayerSpec::ConvTranspose {
        in_channels: i,
        out_channels: o,
        kernel: k,
        stride: s,
        padding: p,
    };
    let arch = GanArch::with_channels(18, 22, 6, [8, 4, 3], [3, 4, 5]);
    let cases: Vec<(&str, Vec<LayerSpec>, Vec<usize>, Mode, usize, bool)> = vec![
        ("conv", vec![conv(2, 3, 4, 2, 1)], vec![2, 2, 7, 6], Mode::Train, 400, false),
        ("conv-transpose", vec![convt(3, 2, 4, 2, 1)], vec![2, 3, 3, 4], Mode::Train, 400, false),
        ("conv-transpose-k3", vec![convt(2, 1, 3, 1, 1)], vec![2, 2, 4, 4], Mode::Train, 400, false),
        ("dense", vec![LayerSpec::Dense { inputs: 7, outputs: 4 }], vec![3, 7], Mode::Train, 400, false),
        ("batchnorm-train", vec![LayerSpec::BatchNorm { channels: 3 }], vec![4, 3, 2, 3], Mode::Train, 400, false),
        ("batchnorm-eval", vec![LayerSpec::BatchNorm { channels: 3 }], vec![4, 3, 2, 3], Mode::Eval, 400, false),
        ("dropout", vec![LayerSpec::Dropout { p: 0.3 }], vec![3, 10], Mode::Train, 400, false),
        (
            "leaky-relu",
            vec![LayerSpec::Activation(ActivationKind::LeakyRelu { slope: 0.2 })],
            vec![4, 9],
            Mode::Train,
            400,
            false,
        ),
        ("sigmoid", vec![LayerSpec::Activation(ActivationKind::Sigmoid)], vec![4, 9], Mode::Train, 400, false),
        ("zero-pad", vec![LayerSpec::ZeroPad { pad: 1 }], vec![2, 2, 3, 4], Mode::Train, 400, false),
        (
            "crop",
            vec![LayerSpec::Crop {
                top: 1,
                left: 2,
                height: 2,
                width: 3,
            }],
            vec![2, 1, 4, 6],
            Mode::Train,
            400,
            false,
        ),
        (
            "reshape",
            vec![LayerSpec::Flatten, LayerSpec::Reshape { shape: vec![3, 4] }],
            vec![2, 2, 6],
            Mode::Train,
            400,
            false,
        ),
        ("generator", arch.generator_specs(), vec![3, 6], Mode::Train, 60, false),
        ("discriminator", arch.discriminator_specs().unwrap(), vec![3, 1, 18, 22], Mode::Train, 60, true),
    ];
    let mut worst = (0.0f64, String::new());
    let mut checks = 0;
    for (name, specs, shape, mode, coords, unit_input) in &cases {
        for seed in 0..SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let n: usize = shape.iter().product();
            let data = (0..n)
                .map(|_| if *unit_input { rng.gen_range(0.01..0.99) } else { rng.gen_range(-1.5..1.5) })
                .collect();
            let x = Tensor::from_vec(shape, data).unwrap();
            let net = Sequential::build(specs, seed).unwrap();
            let rep = check_network(&net, &x, *mode, 1e-5, *coords, seed).unwrap();
            checks += 1;
            if rep.max_rel_error > worst.0 {
                worst = (rep.max_rel_error, format!("{name} seed {seed} ({})", rep.worst));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst.0 < TOL && secs < 120.0,
        format!(
            "{} layer/network cases x {SEEDS} seeds ({checks} checks); max rel error {:.2e} at {}; {:.1}s",
            cases.len(),
            worst.0,
            worst.1,
            secs
        ),
    )
}

fn c3_constants() -> Outcome {
    let arch = GanArch::standard(18, 22, 100);
    let c = GanConfig::default();
    let specs = arch.discriminator_specs().unwrap();
    let mut disc = Sequential::build(&specs[..1], 0).unwrap();
    let padded = disc.forward(&Tensor::zeros(&[1, 1, 18, 22]), Mode::Eval).unwrap();
    let checks = [
        ("padded extent 20x24", arch.padded() == (20, 24)),
        ("discriminator input layer pads to 20x24", padded.shape() == [1, 1, 20, 24]),
        ("lr 2e-4", c.learning_rate == 2e-4),
        ("batch 50", c.batch_size == 50),
        ("epochs 30000", c.epochs == 30_000),
        ("disc:gen steps 2:1", c.disc_steps_per_gen_step == 2),
        ("ema 0.9", c.ema_alpha == 0.9),
    ];
    let failed: Vec<_> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} constants match", checks.len())
        } else {
            format!("mismatch: {failed:?}")
        },
    )
}

fn c4_brown_resnick() -> Outcome {
    let t = Instant::now();
    let mut notes = Vec::new();
    let oracle = hr_chi_oracle(4.0);
    let value = br_chi(4.0).unwrap();
    let analytic_ok = (value - oracle).abs() <= 1e-6 && (value - 0.317311).abs() <= 1e-6;
    notes.push(format!("br_chi(4) = {value:.9} (oracle {oracle:.9})"));

    let (h, w) = (8, 8);
    let geom = SiteGeometry::grid(h, w);
    let pairs = sample_site_pairs(h, w, 100, 11).unwrap();
    let truth = VariogramParams::new(1.2, 3.0).unwrap();
    let chi = pairs
        .iter()
        .map(|&(a, b)| Some(br_chi_at(geom.distance(a, b).unwrap(), &truth).unwrap()))
        .collect();
    let m = ChiMatrix { pairs, chi, q: 0.95 };
    let fit = fit_br(&m, &geom).unwrap();
    let (ea, es) = ((fit.params.alpha() - 1.2).abs(), (fit.params.s() - 3.0).abs());
    let fit_ok = ea < 1e-3 && es < 1e-3;
    notes.push(format!("fit_br error alpha {ea:.1e}, s {es:.1e}"));

    let q = 0.99;
    let mut mc_ok = true;
    for (k, &lambda) in [0.5, 2.0, 4.0, 8.0].iter().enumerate() {
        let sample = hr_bivariate_sample(lambda, 100_000, 40 + k as u64).unwrap();
        let (u, v): (Vec<f64>, Vec<f64>) = sample.into_iter().unzip();
        let est = chi_empirical(&u, &v, q).unwrap();
        let exceed = v.iter().filter(|&&x| x > q).count() as f64;
        let se = (est * (1.0 - est) / exceed).sqrt();
        let target = hr_chi_oracle(lambda);
        let z = (est - target).abs() / se;
        mc_ok &= z < 3.0;
        notes.push(format!("lambda {lambda}: chi_hat {est:.4} vs {target:.4} ({z:.2} se)"));
    }
    let secs = t.elapsed().as_secs_f64();
    notes.push(format!("{secs:.1}s"));
    outcome(analytic_ok && fit_ok && mc_ok && secs < 300.0, notes.join("; "))
}

/// GAN runs shared by criteria 5 to 7.
struct GanRuns {
    data: Vec<MaximaGrid>,
    /// `runs[seed][k]` for n_train = N_TRAIN[k].
    runs: Vec<Vec<RunResult>>,
    secs: Vec<Vec<f64>>,
}

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const N_TRAIN: [usize; 3] = [30, 50, 100];
const EPOCHS: usize = 5_000;
const WIDTH_FACTOR: usize = 16;

fn gan_runs() -> GanRuns {
    let generator = synthetic_generators().get("gauss_copula").unwrap();
    let mut out = GanRuns {
        data: Vec::new(),
        runs: Vec::new(),
        secs: Vec::new(),
    };
    for &seed in &SEEDS {
        let data = make_synthetic(
            &*generator,
            &SyntheticSpec {
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        let mut runs = Vec::new();
        let mut secs = Vec::new();
        for &n in &N_TRAIN {
            let t = Instant::now();
            let r = evaluate_run(
                &data,
                &RunOptions {
                    n_train: n,
                    gan: GanConfig {
                        epochs: EPOCHS,
                        seed,
                        ..Default::default()
                    },
                    width_factor: WIDTH_FACTOR,
                    trace_every: 500,
                    pair_seed: seed,
                    sample_seed: seed,
                    n_samples: Some(DEFAULT_N_STAR),
                    ..Default::default()
                },
            )
            .unwrap();
            secs.push(t.elapsed().as_secs_f64());
            eprintln!(
                "  run seed {seed} n_train {n}: C_te {:.3} (benchmark {:.3}, independence {:.3}) in {:.0}s",
                r.final_c_te,
                r.benchmark,
                r.independence,
                secs.last().unwrap()
            );
            runs.push(r);
        }
        out.data.push(data);
        out.runs.push(runs);
        out.secs.push(secs);
    }
    out
}

fn c5_boundedness(g: &GanRuns) -> Outcome {
    let n_train = 50;
    let k = N_TRAIN.iter().position(|&n| n == n_train).unwrap();
    let (train, _) = g.data[0].split(n_train).unwrap();
    let model = &g.runs[0][k].model;
    let margins = fit_margins(&train).unwrap();
    let pseudo = sample_emulator(model, DEFAULT_N_STAR, 7).unwrap();
    let evt = inverse_transform(&pseudo, &margins, "x").unwrap();
    let dcgan = EmpiricalMargins::from_maxima(&train).inverse_transform(&pseudo, "x").unwrap();
    let (h, w) = train.shape();
    let (mut dc_exceed, mut heavy, mut heavy_with_exceed, mut evt_exceed) = (0, 0, 0, 0);
    for r in 0..h {
        for c in 0..w {
            let tmax = train.site_series(r, c).into_iter().fold(f64::NEG_INFINITY, f64::max);
            let count = |g: &MaximaGrid| g.site_series(r, c).into_iter().filter(|&v| v > tmax).count();
            dc_exceed += count(&dcgan);
            let e = count(&evt);
            evt_exceed += e;
            if margins.site(r, c).params().map(GevParams::xi).unwrap_or(0.0) > 0.0 {
                heavy += 1;
                heavy_with_exceed += usize::from(e > 0);
            }
        }
    }
    outcome(
        dc_exceed == 0 && heavy > 0 && heavy_with_exceed == heavy,
        format!(
            "DCGAN-ablation exceedances {dc_exceed}; evtGAN exceedances {evt_exceed} (n_star {DEFAULT_N_STAR}); \
             sites with xi_hat > 0 exceeding the train max: {heavy_with_exceed}/{heavy}"
        ),
    )
}

fn c6_fidelity(g: &GanRuns) -> Outcome {
    let k = N_TRAIN.iter().position(|&n| n == 50).unwrap();
    let mut flags = Vec::new();
    let mut rows = Vec::new();
    for (s, runs) in g.runs.iter().enumerate() {
        let r = &runs[k];
        let ok = r.final_c_te < r.independence && r.final_c_te <= 2.0 * r.benchmark;
        flags.push(ok);
        rows.push(format!(
            "seed {}: {:.3} vs indep {:.3}, 2xbench {:.3} {}",
            SEEDS[s],
            r.final_c_te,
            r.independence,
            2.0 * r.benchmark,
            if ok { "ok" } else { "x" }
        ));
    }
    let slowest = g.secs.iter().map(|s| s[k]).fold(0.0, f64::max);
    outcome(
        majority(&flags) && slowest < 1800.0,
        format!(
            "n_train 50, {EPOCHS} epochs, width/{WIDTH_FACTOR}: {}/{} seeds [{}]; slowest run {slowest:.0}s",
            flags.iter().filter(|f| **f).count(),
            flags.len(),
            rows.join("; ")
        ),
    )
}

fn c7_sensitivity(g: &GanRuns) -> Outcome {
    let mut mono = Vec::new();
    let mut decr = Vec::new();
    let mut rows = Vec::new();
    let last = N_TRAIN.len() - 1;
    for (s, runs) in g.runs.iter().enumerate() {
        let finals: Vec<f64> = runs.iter().map(|r| r.final_c_te).collect();
        let trace = &runs[last].trace;
        let first = trace.iter().find(|p| p.epoch == 500).and_then(|p| p.c_te).map(|e| e.value);
        let end = trace.iter().find(|p| p.epoch == EPOCHS).and_then(|p| p.c_te).map(|e| e.value);
        let d = matches!((first, end), (Some(a), Some(b)) if b < a);
        mono.push(non_increasing(&finals));
        decr.push(d);
        rows.push(format!(
            "seed {}: C_te {:?} trace(n=100) {:.3} -> {:.3}",
            SEEDS[s],
            finals.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            first.unwrap_or(f64::NAN),
            end.unwrap_or(f64::NAN)
        ));
    }
    let count = |v: &[bool]| v.iter().filter(|f| **f).count();
    outcome(
        majority(&mono) && majority(&decr),
        format!(
            "non-increasing over n_train {N_TRAIN:?}: {}/{}; n=100 trace decreasing: {}/{} [{}]",
            count(&mono),
            mono.len(),
            count(&decr),
            decr.len(),
            rows.join("; ")
        ),
    )
}

fn c8_spectral() -> Outcome {
    let n = 1000;
    let u: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let como = spectral_empirical(&u, &u, 0.95).unwrap();
    let como_ok = como.angles.iter().all(|&a| a == 0.5);
    let mut notes = vec![format!("comonotone: {} angles all 0.5: {como_ok}", como.angles.len())];
    let bins = 20;
    let mut hr_ok = true;
    // lambda = 8 is reported but not gated: see the finite-radius note in the README
    for (k, &lambda) in [0.5, 1.0, 2.0, 4.0, 8.0].iter().enumerate() {
        let sample = hr_bivariate_sample(lambda, 200_000, 70 + k as u64).unwrap();
        let (x, y): (Vec<f64>, Vec<f64>) = sample.into_iter().unzip();
        let s = spectral_empirical(&x, &y, 0.95).unwrap();
        let m = s.angles.len() as f64;
        // cumulative histogram at the bin edges against the integrated density
        let mut sup = 0.0f64;
        let mut model_cdf = 0.0;
        let mut prev = 0.0;
        for b in 1..=bins {
            let edge = b as f64 / bins as f64;
            model_cdf += simpson(|w| br_spectral_density(w, lambda).unwrap_or(0.0), prev, edge);
            prev = edge;
            let emp = s.angles.iter().filter(|&&a| a <= edge).count() as f64 / m;
            sup = sup.max((emp - model_cdf).abs());
        }
        let gated = lambda <= 4.0;
        if gated {
            hr_ok &= sup < 0.05;
        }
        notes.push(format!(
            "lambda {lambda}{}: {} angles, sup error {sup:.4}",
            if gated { "" } else { " (diagnostic)" },
            s.angles.len()
        ));
    }
    outcome(como_ok && hr_ok, notes.join("; "))
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let n = 2000;
    let h = (b - a) / n as f64;
    // open at the ends: the density vanishes at 0 and 1, so endpoints are evaluated just inside
    let g = |x: f64| f(x.clamp(1e-12, 1.0 - 1e-12));
    let mut s = g(a) + g(b);
    for k in 1..n {
        s += g(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn c9_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut commands = 0;
    for dir in [a.path(), b.path()] {
        commands = run_stochastic_commands(dir);
    }
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let differing: Vec<&String> = sa.keys().filter(|k| sb.get(*k) != sa.get(*k)).collect();
    let pass = differing.is_empty() && sa.len() == sb.len() && commands > 0;
    outcome(
        pass,
        format!(
            "{commands} commands, {} artifacts compared{}",
            sa.len(),
            if differing.is_empty() { String::new() } else { format!("; differing {differing:?}") }
        ),
    )
}

fn run_stochastic_commands(dir: &Path) -> usize {
    let gan = ["--epochs", "20", "--width-factor", "16", "--latent-dim", "8", "--pairs", "12"];
    let eval = ["--in", "grid.evtgrid", "--n-train", "60", "--model", "model.evtg", "--pairs", "12", "--seed", "4"];
    let runs: Vec<Vec<&str>> = vec![
        vec!["synth", "--height", "8", "--width", "8", "--n", "160", "--seed", "3", "--out", "grid.evtgrid"],
        vec!["synth", "--kind", "hr_pairs", "--n", "120", "--seed", "5", "--out", "hr.evtgrid", "--csv"],
        vec!["synth", "--kind", "mixed", "--n", "120", "--seed", "6", "--out", "mixed.evtgrid"],
        vec!["fit-gev", "--in", "grid.evtgrid", "--out", "gev.csv"],
        [&["train", "--in", "grid.evtgrid", "--n-train", "60", "--seed", "1", "--trace-every", "10", "--out", "model.evtg"][..], &gan].concat(),
        vec!["sample", "--model", "model.evtg", "--n", "500", "--seed", "2", "--out", "sample.evtgrid"],
        [&["eval-chi"][..], &eval, &["--out", "chi.csv"]].concat(),
        [&["eval-spectral"][..], &eval, &["--q", "0.8", "--radius-quantile", "0.8", "--out", "spec.csv"]].concat(),
        vec!["fit-br", "--in", "grid.evtgrid", "--n-train", "100", "--q", "0.8", "--pairs", "30", "--out", "br.csv"],
        vec!["ablate-dcgan", "--in", "grid.evtgrid", "--model", "model.evtg", "--n-train", "60", "--n", "500", "--out", "ablate.csv"],
        [
            &[
                "experiment", "sensitivity", "--n", "2000", "--seeds", "0,1", "--trace-every", "1", "--epochs", "2",
                "--n-samples", "200", "--out", "sens",
            ][..],
            &gan,
        ]
        .concat(),
    ];
    for args in &runs {
        let out = Command::new(env!("CARGO_BIN_EXE_evtgan"))
            .args(args)
            .current_dir(dir)
            .env_remove("EVTGAN_OUT_DIR")
            .output()
            .unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    runs.len()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    let mut m = BTreeMap::new();
    walk(dir, dir, &mut m);
    m
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let selected = |k: usize| only.as_ref().map_or(true, |o| o.contains(&k));
    let names = [
        "GEV oracle recovery",
        "gradient suite",
        "shape/padding and training constants",
        "Brown-Resnick analytics",
        "boundedness contrast",
        "dependence fidelity at desk scale",
        "sensitivity to n_train",
        "spectral diagnostics",
        "determinism",
    ];
    let mut gan: Option<GanRuns> = None;
    let mut failed = 0;
    for (i, name) in names.iter().enumerate() {
        let k = i + 1;
        if !selected(k) {
            continue;
        }
        if (5..=7).contains(&k) && gan.is_none() {
            eprintln!("training {} GAN runs for criteria 5-7", SEEDS.len() * N_TRAIN.len());
            gan = Some(gan_runs());
        }
        let t = Instant::now();
        let o = match k {
            1 => c1_gev_recovery(),
            2 => c2_gradients(),
            3 => c3_constants(),
            4 => c4_brown_resnick(),
            5 => c5_boundedness(gan.as_ref().unwrap()),
            6 => c6_fidelity(gan.as_ref().unwrap()),
            7 => c7_sensitivity(gan.as_ref().unwrap()),
            8 => c8_spectral(),
            _ => c9_determinism(),
        };
        failed += usize::from(!o.pass);
        println!(
            "[{}] criterion {k} {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
