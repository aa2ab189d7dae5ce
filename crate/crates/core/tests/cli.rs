use std::path::Path;
use std::process::{Command, Output};

use gp_hierarchy::lowrank::SeparableKernel;
use gp_hierarchy::snapshot::save_kernel;
use gp_hierarchy::{make_grid, Kernel, WaveFunction};
use num_complex::Complex64 as C64;

const BASE: &str = r#"
[grid]
n = 1
points = 8

[model]
interaction = "cubic"
mu = 1
alpha = 1.0

[initial]
modes = [{ p = [0], re = 0.4 }, { p = [1], re = 0.2 }]

[truncation]
K = 2

[time]
horizon = 0.1
steps = 16

[closure]
kind = "oracle"
oracle_steps = 1024

[estimate]
samples = 10
seed = 7
levels = [1]
"#;

fn gph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gph"))
        .args(args)
        .output()
        .expect("spawn gph")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn run_writes_snapshots_that_quasinorm_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", BASE);
    let out = dir.path().join("out");
    let o = gph(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(&out.join("run.json"));
    assert_eq!(report["provenance"]["format_version"], 1);
    assert_eq!(report["provenance"]["seed"], 7);
    assert_eq!(report["provenance"]["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(report["horizon"]["source"], "fixed");
    assert_eq!(report["quasi_norms"].as_array().unwrap().len(), 17);
    for e in report["oracle_error"].as_array().unwrap() {
        assert!(e.as_f64().unwrap() < 1e-5);
    }
    assert!(out.join("run.timing.json").exists());

    let q = gph(&[
        "quasinorm",
        "--alpha",
        "1",
        out.join("level2.gphk").to_str().unwrap(),
        out.join("level1.gphk").to_str().unwrap(),
    ]);
    assert_eq!(q.status.code(), Some(0), "{}", stderr(&q));
    let v: serde_json::Value = serde_json::from_slice(&q.stdout).unwrap();
    let reread = v["result"]["value"].as_f64().unwrap();
    let in_process = report["final_quasi_norm"].as_f64().unwrap();
    assert!((reread - in_process).abs() <= 1e-12, "{reread} vs {in_process}");

    let ok = gph(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    assert_eq!(json(&out.join("verify.json"))["passed"], true);
}

#[test]
fn constant_initial_data_keeps_the_quasi_norm() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE.replace("modes = [{ p = [0], re = 0.4 }, { p = [1], re = 0.2 }]", "modes = [{ p = [0], re = 0.5 }]");
    let cfg = write_config(dir.path(), "c.toml", &text);
    let o = gph(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&dir.path().join("run.json"));
    let values: Vec<f64> = r["quasi_norms"]
        .as_array()
        .unwrap()
        .iter()
        .map(|n| n["value"].as_f64().unwrap())
        .collect();
    for v in &values {
        assert!((v - values[0]).abs() <= 1e-12 * values[0]);
    }
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let missing = BASE.replace("modes = [{ p = [0], re = 0.4 }, { p = [1], re = 0.2 }]", "");
    let cfg = write_config(dir.path(), "m.toml", &missing);
    let o = gph(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("initial"), "{}", stderr(&o));

    let few = write_config(dir.path(), "few.toml", &BASE.replace("samples = 10", "samples = 5"));
    let o = gph(&["estimate", "--config", &few]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("estimate.samples"));

    let o = gph(&["run"]);
    assert_eq!(o.status.code(), Some(2));
    let o = gph(&["run", "--config", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn budget_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{BASE}\n[representation]\nmax_dense_entries = 100\n");
    let cfg = write_config(dir.path(), "b.toml", &text);
    let o = gph(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn failed_verification_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "v.toml", BASE);
    let out = dir.path().to_str().unwrap();
    assert_eq!(gph(&["run", "--config", &cfg, "--out", out]).status.code(), Some(0));
    let strict = write_config(dir.path(), "strict.toml", &format!("{BASE}\n[verify]\ntolerance = 1e-30\n"));
    let o = gph(&["verify", "--config", &strict, "--out", out]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert_eq!(json(&dir.path().join("verify.json"))["passed"], false);
}

#[test]
fn estimate_is_reproducible_and_seed_overridable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "e.toml", BASE);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for out in [&a, &b] {
        let o = gph(&["estimate", "--config", &cfg, "--workers", "2", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let o = gph(&["estimate", "--config", &cfg, "--seed", "8", "--out", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(&a, "estimate.csv"), read(&b, "estimate.csv"));
    assert_eq!(read(&a, "estimate.json"), read(&b, "estimate.json"));
    assert_ne!(read(&a, "estimate.csv"), read(&c, "estimate.csv"));
    assert_eq!(json(&c.join("estimate.json"))["provenance"]["seed"], 8);
    let csv = String::from_utf8(read(&a, "estimate.csv")).unwrap();
    assert!(csv.starts_with("k,j,sample,ratio\n"));
    assert!(csv.lines().last().unwrap().starts_with("max,,,"));
    assert_eq!(csv.lines().count(), 12);
}

#[test]
fn estimate_reports_the_refinement_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE.replace("levels = [1]", "levels = [1]\nrefine_points = [4, 8]");
    let cfg = write_config(dir.path(), "r.toml", &text);
    let o = gph(&["estimate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&dir.path().join("estimate.json"));
    let rows = r["refinement"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0]["ratio"].is_null());
    assert!(rows[1]["ratio"].as_f64().unwrap() > 0.0);
}

#[test]
fn converge_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE.replace("horizon = 0.1", "horizon = \"theorem\"\nc_hat = 0.2");
    let cfg = write_config(dir.path(), "cv.toml", &format!("{text}\n[solver]\nmax_depth = 6\n"));
    let o = gph(&["converge", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("converge.csv")).unwrap();
    assert!(csv.starts_with("depth,increment,ratio,iterate_norm,envelope\n"));
    assert_eq!(csv.lines().count(), 7);
    let r = json(&dir.path().join("converge.json"));
    assert_eq!(r["dominated"], true);
    assert_eq!(r["horizon"]["source"], "theorem");
}

#[test]
fn quasinorm_on_hand_built_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let grid = make_grid(1, 4).unwrap();
    // ‖φ‖² = 1/2 with the L² normalization of the coefficients
    let phi = WaveFunction::from_modes(&grid, &[(vec![0], C64::new((0.5f64 / std::f64::consts::TAU).sqrt(), 0.0))]).unwrap();
    let mut files = Vec::new();
    for k in 1..=32 {
        let p = dir.path().join(format!("l{k}.gphs"));
        save_kernel(&p, &Kernel::from(SeparableKernel::factorized(&phi, k))).unwrap();
        files.push(p.to_string_lossy().into_owned());
    }
    let value = |n: usize| {
        let mut args = vec!["quasinorm", "--alpha", "1"];
        args.extend(files[..n].iter().map(String::as_str));
        let o = gph(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        v["result"]["value"].as_f64().unwrap()
    };
    let full = value(32);
    assert!((full - 0.5).abs() <= 1e-10 + 0.5 * 2f64.powi(-33), "{full}");
    let mut prev = 0.0;
    for n in [1, 2, 4, 8, 16, 32] {
        let v = value(n);
        assert!(v >= prev);
        prev = v;
    }

    let gap = gph(&["quasinorm", "--alpha", "1", &files[0], &files[2]]);
    assert_eq!(gap.status.code(), Some(2));

    let bad = dir.path().join("bad.gphk");
    let mut bytes = std::fs::read(&files[0]).unwrap();
    bytes[0] = b'X';
    std::fs::write(&bad, bytes).unwrap();
    let o = gph(&["quasinorm", "--alpha", "1", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("byte 0"), "{}", stderr(&o));
}

#[test]
fn single_level_snapshot_gives_half_the_norm() {
    let dir = tempfile::tempdir().unwrap();
    let grid = make_grid(1, 4).unwrap();
    let c = (4.0f64 / std::f64::consts::TAU).sqrt();
    let phi = WaveFunction::from_modes(&grid, &[(vec![0], C64::new(c, 0.0))]).unwrap();
    let p = dir.path().join("one.gphk");
    let dense = SeparableKernel::factorized(&phi, 1).to_dense(&Default::default()).unwrap();
    save_kernel(&p, &Kernel::from(dense)).unwrap();
    let o = gph(&["quasinorm", "--alpha", "1", p.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["result"]["value"].as_f64().unwrap() - 2.0).abs() < 1e-10);
}

#[test]
fn zero_data_needs_a_fallback_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let zero = BASE
        .replace("modes = [{ p = [0], re = 0.4 }, { p = [1], re = 0.2 }]", "modes = [{ p = [0], re = 0.0 }]")
        .replace("horizon = 0.1", "horizon = \"theorem\"\nc_hat = 0.2");
    let cfg = write_config(dir.path(), "z.toml", &zero);
    let o = gph(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("time.fallback_horizon"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "z2.toml", &zero.replace("c_hat = 0.2", "c_hat = 0.2\nfallback_horizon = 0.3"));
    let o = gph(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&dir.path().join("run.json"));
    assert_eq!(r["horizon"]["source"], "fallback");
    assert_eq!(r["horizon"]["horizon"], 0.3);
    assert_eq!(r["final_quasi_norm"], 0.0);
}

#[test]
fn snapshot_initial_data_runs_with_a_zero_closure() {
    let dir = tempfile::tempdir().unwrap();
    let grid = make_grid(1, 8).unwrap();
    let phi = WaveFunction::from_modes(&grid, &[(vec![0], C64::new(0.4, 0.0)), (vec![1], C64::new(0.2, 0.0))]).unwrap();
    for k in 1..=2 {
        save_kernel(dir.path().join(format!("g{k}.gphs")), &Kernel::from(SeparableKernel::factorized(&phi, k))).unwrap();
    }
    let text = BASE
        .replace(
            "modes = [{ p = [0], re = 0.4 }, { p = [1], re = 0.2 }]",
            "snapshots = [\"g1.gphs\", \"g2.gphs\"]",
        )
        .replace("kind = \"oracle\"", "kind = \"zero\"");
    let cfg = write_config(dir.path(), "s.toml", &text);
    let out = dir.path().join("out");
    let o = gph(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&out.join("run.json"));
    assert!(r["oracle_error"].is_null());
    let q0 = r["horizon"]["q_hat"].as_f64().unwrap();
    assert!((q0 - 1.2199688861558058).abs() < 1e-9);

    let oracle = write_config(dir.path(), "so.toml", &text.replace("kind = \"zero\"", "kind = \"oracle\""));
    let o = gph(&["run", "--config", &oracle]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("closure.kind"));
}
