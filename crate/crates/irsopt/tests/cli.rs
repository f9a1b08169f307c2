use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_irsopt"));
    c.env_remove("IRSOPT_OUTPUT_ROOT");
    c
}

fn smoke() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/smoke.toml")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn csv_column(path: &Path, col: &str) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == col).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

#[test]
fn optimize_smoke_is_fast_and_settles() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("opt");
    let t0 = Instant::now();
    ok(&["optimize", "-c", smoke().to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(t0.elapsed().as_secs_f64() < 5.0);
    let delta: Vec<f64> = csv_column(&out.join("opt_report.csv"), "delta")
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    assert!(delta.len() >= 3);
    for w in delta[2..].windows(2) {
        assert!(w[1] <= w[0], "{delta:?}");
    }
    for f in ["beams.json", "config.toml", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn optimize_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        ok(&["optimize", "-c", smoke().to_str().unwrap(), "-o", d.to_str().unwrap()]);
    }
    for f in ["beams.json", "opt_report.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    // another thread count gives the same bits
    let c = dir.path().join("c");
    ok(&["--threads", "1", "optimize", "-c", smoke().to_str().unwrap(), "-o", c.to_str().unwrap()]);
    assert_eq!(fs::read(a.join("beams.json")).unwrap(), fs::read(c.join("beams.json")).unwrap());
}

#[test]
fn invalid_constraint_names_the_key() {
    let out = run(&[
        "optimize",
        "-c",
        smoke().to_str().unwrap(),
        "--set",
        "beams.constraint=XC",
        "-o",
        tempfile::tempdir().unwrap().path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beams.constraint"));
}

#[test]
fn exit_codes_by_class() {
    let out = run(&["optimize", "-c", "/nonexistent/config.toml"]);
    assert_eq!(out.status.code(), Some(4));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("beams.json");
    fs::write(&bad, "not json").unwrap();
    let out = run(&[
        "evaluate",
        "-c",
        smoke().to_str().unwrap(),
        "--beams",
        bad.to_str().unwrap(),
        "-o",
        dir.path().join("e").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn evaluate_checks_the_beam_hash() {
    let dir = tempfile::tempdir().unwrap();
    let opt = dir.path().join("opt");
    let cfg = smoke();
    let cfg = cfg.to_str().unwrap();
    ok(&["optimize", "-c", cfg, "-o", opt.to_str().unwrap()]);
    let beams = opt.join("beams.json");
    let beams = beams.to_str().unwrap();
    // the evaluation section is outside the hash
    let e1 = dir.path().join("e1");
    ok(&[
        "evaluate",
        "-c",
        cfg,
        "--beams",
        beams,
        "--realizations",
        "4",
        "-o",
        e1.to_str().unwrap(),
    ]);
    let e2 = dir.path().join("e2");
    let out = run(&["evaluate", "-c", cfg, "--set", "seed=99", "--beams", beams, "-o", e2.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    ok(&["evaluate", "-c", cfg, "--set", "seed=99", "--beams", beams, "--force", "-o", e2.to_str().unwrap()]);
}

#[test]
fn evaluate_random_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke();
    let cfg = cfg.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        ok(&["evaluate", "-c", cfg, "--beams", "random", "-o", d.to_str().unwrap()]);
    }
    for f in ["eval.csv", "eval_summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let rows = csv_column(&a.join("eval.csv"), "sum_rate");
    assert_eq!(rows.len(), 6);
    let header = fs::read_to_string(a.join("eval.csv")).unwrap();
    assert!(header.starts_with("# run="));
    assert!(header.lines().next().unwrap().contains("seed=3"));
}

#[test]
fn one_point_sweep_matches_optimize_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke();
    let cfg = cfg.to_str().unwrap();
    let sweep = dir.path().join("sweep");
    ok(&["sweep", "-c", cfg, "--axis", "seed=3", "-o", sweep.to_str().unwrap()]);
    let opt = dir.path().join("opt");
    ok(&["optimize", "-c", cfg, "-o", opt.to_str().unwrap()]);
    let ev = dir.path().join("ev");
    ok(&[
        "evaluate",
        "-c",
        cfg,
        "--beams",
        opt.join("beams.json").to_str().unwrap(),
        "-o",
        ev.to_str().unwrap(),
    ]);
    let p = sweep.join("point-000");
    assert_eq!(fs::read(p.join("beams.json")).unwrap(), fs::read(opt.join("beams.json")).unwrap());
    assert_eq!(csv_column(&p.join("eval.csv"), "sum_rate"), csv_column(&ev.join("eval.csv"), "sum_rate"));
    assert_eq!(csv_column(&sweep.join("sweep.csv"), "status"), vec!["ok"]);
}

#[test]
fn sweep_halves_grids_and_survives_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke();
    let sweep = dir.path().join("sweep");
    ok(&[
        "sweep",
        "-c",
        cfg.to_str().unwrap(),
        "--set",
        "irs.grid=[2,4]",
        "--set",
        "irs.constant_total_area=true",
        "--set",
        "irs.surfaces=[{wall=\"x0\",center=[3.0,1.5]},{wall=\"y0\",center=[3.0,1.5]}]",
        "--axis",
        "irs.count=1,2,3",
        "-o",
        sweep.to_str().unwrap(),
    ]);
    let tiles = |n: usize| {
        let text = fs::read_to_string(sweep.join(format!("point-{n:03}/beams.json"))).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["tiles"].as_array().unwrap().len()
    };
    // one 2x4 surface = two tiles; two 2x2 surfaces = one tile each
    assert_eq!(tiles(0), 2);
    assert_eq!(tiles(1), 2);
    assert_eq!(csv_column(&sweep.join("sweep.csv"), "status"), vec!["ok", "ok", "failed"]);
}

#[test]
fn array_factor_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("af");
    ok(&[
        "array-factor",
        "-c",
        smoke().to_str().unwrap(),
        "--beams",
        "random",
        "--step",
        "1",
        "-o",
        out.to_str().unwrap(),
    ]);
    let gains: Vec<f64> = csv_column(&out.join("af_tile0_ue0_s0.csv"), "gain_db")
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(gains.len(), 360);
    assert!(gains.iter().all(|&g| g <= 0.0));
    assert!(gains.contains(&0.0));
    assert!(out.join("af_bs_ue0_s0.csv").exists());
    assert_eq!(csv_column(&out.join("ue_directions.csv"), "tile"), vec!["0"]);
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("IRSOPT_OUTPUT_ROOT", dir.path())
        .args(["evaluate", "-c", smoke().to_str().unwrap(), "--beams", "random", "--realizations", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("evaluate/eval_summary.json").exists());
}
