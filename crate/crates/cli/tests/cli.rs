use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use evtgan::grid::{GridData, MaximaGrid};

fn evtgan(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evtgan"))
        .args(args)
        .current_dir(cwd)
        .env_remove("EVTGAN_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(cwd: &Path, args: &[&str]) {
    let out = evtgan(cwd, args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(cwd: &Path, args: &[&str]) -> (i32, String) {
    let out = evtgan(cwd, args);
    (out.status.code().expect("exit code"), String::from_utf8_lossy(&out.stderr).into_owned())
}

/// Every file under `dir`, keyed by relative path.
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

const SMALL_GRID: [&str; 8] = ["--height", "8", "--width", "8", "--n", "160", "--seed", "3"];
const SMALL_GAN: [&str; 10] = [
    "--epochs",
    "20",
    "--width-factor",
    "16",
    "--latent-dim",
    "8",
    "--trace-every",
    "10",
    "--pairs",
    "12",
];

/// synth -> fit-gev -> train -> sample -> evaluations, all in `dir`.
fn full_workflow(dir: &Path) {
    let mut synth = vec!["synth", "--out", "grid.evtgrid", "--csv"];
    synth.extend(SMALL_GRID);
    ok(dir, &synth);
    ok(dir, &["fit-gev", "--in", "grid.evtgrid", "--n-train", "60", "--out", "gev.csv"]);
    let mut train = vec!["train", "--in", "grid.evtgrid", "--n-train", "60", "--seed", "1", "--out", "model.evtg"];
    train.extend(SMALL_GAN);
    ok(dir, &train);
    ok(dir, &["sample", "--model", "model.evtg", "--n", "300", "--seed", "2", "--out", "sample.evtgrid"]);
    ok(
        dir,
        &["sample", "--model", "model.evtg", "--margins", "gev.csv", "--n", "50", "--rerank", "--out", "sample2.evtgrid"],
    );
    let eval = ["--in", "grid.evtgrid", "--n-train", "60", "--model", "model.evtg", "--pairs", "12", "--seed", "4"];
    ok(dir, &[&["eval-chi"][..], &eval, &["--out", "chi.csv"]].concat());
    ok(
        dir,
        &[&["eval-spectral"][..], &eval, &["--radius-quantile", "0.8", "--pair", "0,0,0,1", "--out", "spec.csv"]].concat(),
    );
    ok(dir, &["fit-br", "--in", "grid.evtgrid", "--n-train", "100", "--pairs", "30", "--q", "0.8", "--out", "br.csv"]);
    ok(
        dir,
        &["ablate-dcgan", "--in", "grid.evtgrid", "--n-train", "60", "--model", "model.evtg", "--n", "400", "--out", "ablate.csv"],
    );
    ok(
        dir,
        &[
            &["report"][..],
            &eval,
            &["--q", "0.8", "--radius-quantile", "0.8", "--trace", "model.trace.csv", "--out", "report"],
        ]
        .concat(),
    );
}

#[test]
fn workflow_is_byte_identical_on_rerun() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    full_workflow(a.path());
    full_workflow(b.path());
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (name, bytes) in &sa {
        assert!(bytes == &sb[name], "{name} differs between reruns");
    }
    for expected in [
        "grid.evtgrid",
        "grid.csv",
        "grid.manifest.json",
        "gev.csv",
        "model.evtg",
        "model.losses.csv",
        "model.trace.csv",
        "model.gev.csv",
        "model.manifest.json",
        "sample.evtgrid",
        "chi.csv",
        "chi.long.csv",
        "chi.summary.csv",
        "chi.svg",
        "spec.csv",
        "spec.hist.csv",
        "spec.pair0.svg",
        "br.csv",
        "br.curve.csv",
        "br.points.csv",
        "ablate.csv",
        "ablate.evtgan.evtgrid",
        "ablate.dcgan.evtgrid",
        "report/chi_scatter.csv",
        "report/spectral_hist.csv",
        "report/trace.csv",
        "report/gev_params.csv",
        "report/report.manifest.json",
    ] {
        assert!(sa.contains_key(expected), "missing {expected}: {:?}", sa.keys());
    }
    check_formats(a.path(), &sa);
}

fn lines(bytes: &[u8]) -> Vec<String> {
    String::from_utf8(bytes.to_vec()).unwrap().lines().map(String::from).collect()
}

fn check_formats(dir: &Path, files: &BTreeMap<String, Vec<u8>>) {
    let gev = lines(&files["gev.csv"]);
    assert_eq!(gev[0], "site_row,site_col,mu,sigma,xi,nll,converged");
    assert_eq!(gev.len(), 1 + 64);

    let chi = lines(&files["chi.csv"]);
    let header: Vec<&str> = chi[0].split(',').collect();
    for col in ["chi_test", "chi_train", "chi_evtgan", "chi_br", "q", "seed"] {
        assert!(header.contains(&col), "{header:?}");
    }
    assert_eq!(chi.len(), 1 + 12, "one row per evaluated pair");
    assert_eq!(lines(&files["chi.long.csv"])[0], "i,j,chi,q,source,seed");

    let hist = lines(&files["spec.hist.csv"]);
    assert!(hist[0].starts_with("pair,i,j,source,bin,bin_lo,bin_hi,count,density,br_density"));
    let test_rows = hist.iter().filter(|l| l.split(',').nth(3) == Some("test")).count();
    assert_eq!(test_rows, 20, "20 bins on [0, 1]");
    assert_eq!(lines(&files["spec.csv"])[0], "pair,i,j,source,radius_quantile,seed,angle");

    let trace = lines(&files["model.trace.csv"]);
    let epochs: Vec<&str> = trace[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(epochs, ["10", "20"]);

    let ablate = lines(&files["ablate.csv"]);
    let cols: Vec<&str> = ablate[0].split(',').collect();
    let dcgan = cols.iter().position(|c| *c == "dcgan_exceedances").unwrap();
    for row in &ablate[1..] {
        assert_eq!(row.split(',').nth(dcgan), Some("0"), "empirical back-transform stays within the train range");
    }

    for (name, bytes) in files.iter().filter(|(n, _)| n.ends_with(".svg")) {
        let text = std::str::from_utf8(bytes).unwrap();
        let doc = roxmltree::Document::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(doc.root_element().tag_name().name(), "svg");
    }

    let manifest: serde_json::Value = serde_json::from_slice(&files["model.manifest.json"]).unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["config"]["gan"]["epochs"], 20);
    assert_eq!(manifest["inputs"][0]["path"], "grid.evtgrid");
    for art in manifest["artifacts"].as_array().unwrap() {
        let path = dir.join(art["path"].as_str().unwrap());
        let digest = format!("{:x}", <sha2::Sha256 as sha2::Digest>::digest(fs::read(path).unwrap()));
        assert_eq!(art["sha256"], digest.as_str());
    }
}

#[test]
fn exit_codes_distinguish_error_classes() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    assert_eq!(code(dir, &["train", "--in", "x", "--out", "m", "--no-such-flag"]).0, 2);
    assert_eq!(code(dir, &["fit-gev", "--out", "g.csv"]).0, 2, "missing required flag");
    let (c, msg) = code(dir, &["fit-gev", "--in", "absent.evtgrid", "--out", "g.csv"]);
    assert_eq!(c, 3);
    assert!(msg.contains("absent.evtgrid"), "{msg}");
    assert_eq!(code(dir, &["synth", "--kind", "nope", "--out", "g.evtgrid"]).0, 2);

    fs::write(dir.join("junk.evtgrid"), b"not a grid").unwrap();
    assert_eq!(code(dir, &["fit-gev", "--in", "junk.evtgrid", "--out", "g.csv"]).0, 3);

    // constant series at every site: every GEV fit fails
    let constant = MaximaGrid::new(GridData::new(30, 2, 2, vec![1.0; 120]).unwrap(), 1, "flat").unwrap();
    let mut bytes = Vec::new();
    constant.write_to(&mut bytes).unwrap();
    fs::write(dir.join("flat.evtgrid"), bytes).unwrap();
    let (c, msg) = code(dir, &["fit-gev", "--in", "flat.evtgrid", "--out", "flat.csv"]);
    assert_eq!(c, 4, "{msg}");
    let table = fs::read_to_string(dir.join("flat.csv")).unwrap();
    assert_eq!(table.matches(",NA,NA,NA,NA,false").count(), 4);

    let mut synth = vec!["synth", "--out", "grid.evtgrid"];
    synth.extend(SMALL_GRID);
    ok(dir, &synth);
    assert_eq!(code(dir, &["eval-chi", "--in", "grid.evtgrid", "--q", "1.5", "--out", "c.csv"]).0, 2);
    let (c, msg) = code(dir, &["report", "--in", "grid.evtgrid", "--out", "rep"]);
    assert_eq!(c, 2);
    assert!(msg.contains("chi_evtgan") && msg.contains("traces"), "{msg}");
    assert!(!dir.join("rep").exists());
    let (c, _) = code(
        dir,
        &["experiment", "sensitivity", "--in", "grid.evtgrid", "--epochs", "1", "--out", "sens"],
    );
    assert_eq!(c, 3, "fewer than 2000 observations");
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    fs::write(
        dir.join("run.toml"),
        "[synth]\nheight = 3\nwidth = 5\nn = 40\nkind = \"mixed\"\nseed = 9\n",
    )
    .unwrap();
    ok(dir, &["--config", "run.toml", "synth", "--n", "30", "--out", "g.evtgrid"]);
    let g = MaximaGrid::read_from(fs::read(dir.join("g.evtgrid")).unwrap().as_slice()).unwrap();
    assert_eq!((g.shape(), g.n(), g.variable()), ((3, 5), 30, "mixed"));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("g.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);

    fs::write(dir.join("bad.toml"), "[synth]\nno_such_key = 1\n").unwrap();
    assert_eq!(code(dir, &["--config", "bad.toml", "synth", "--out", "h.evtgrid"]).0, 2);
}

#[test]
fn out_dir_env_resolves_relative_outputs() {
    let d = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_evtgan"))
        .args(["synth", "--height", "2", "--width", "2", "--n", "20", "--out", "g.evtgrid"])
        .current_dir(d.path())
        .env("EVTGAN_OUT_DIR", d.path().join("results"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(d.path().join("results/g.evtgrid").exists());
    assert!(d.path().join("results/g.manifest.json").exists());
    assert!(!d.path().join("g.evtgrid").exists());
}

#[test]
fn inputs_are_not_modified() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    let mut synth = vec!["synth", "--out", "grid.evtgrid"];
    synth.extend(SMALL_GRID);
    ok(dir, &synth);
    let before = fs::read(dir.join("grid.evtgrid")).unwrap();
    ok(dir, &["fit-gev", "--in", "grid.evtgrid", "--out", "gev.csv"]);
    ok(dir, &["fit-br", "--in", "grid.evtgrid", "--q", "0.8", "--pairs", "30", "--out", "br.csv"]);
    assert_eq!(fs::read(dir.join("grid.evtgrid")).unwrap(), before);
}
