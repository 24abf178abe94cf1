use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use analog_verify::protocols::binomial_stderr;
use averify::plot::svg_from_csv;
use serde_json::Value;

fn averify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_averify")).args(args).output().expect("binary runs")
}

fn ok(out: &Output) -> PathBuf {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    PathBuf::from(String::from_utf8(out.stdout.clone()).unwrap().trim())
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn rows(csv_path: &Path) -> Vec<Vec<f64>> {
    let mut r = csv::Reader::from_path(csv_path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn without_timestamp(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("created");
    v
}

const ISING_ECHO: &str = r#"
seed = 1
[model]
preset = "Ising2Q"
[protocol]
kind = "time_reversal"
tau_grid = [1e-3, 5e-3, 1e-2, 2e-2]
shots_per_run = 200
runs_per_point = 5
"#;

#[test]
fn noiseless_ising_echo_is_flat_and_archived() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", ISING_ECHO);
    let out = tmp.path().join("runs");
    let args = ["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];

    let first = ok(&averify(&args));
    assert!(first.ends_with("run-0000"));
    let header = fs::read_to_string(first.join("curve.csv")).unwrap();
    assert!(header.starts_with("time_s,success_prob,stderr,n_samples\n"));
    for r in rows(&first.join("curve.csv")) {
        assert!(r[1] >= 0.97);
        assert_eq!(r[3], 1000.0);
    }

    // a second run gets a new directory and identical numbers
    let second = ok(&averify(&args));
    assert!(second.ends_with("run-0001"));
    assert!(first.join("curve.csv").exists());
    assert_eq!(fs::read(first.join("curve.csv")).unwrap(), fs::read(second.join("curve.csv")).unwrap());
    assert_eq!(
        without_timestamp(json(&first.join("metadata.json"))),
        without_timestamp(json(&second.join("metadata.json")))
    );
    let meta = json(&first.join("metadata.json"));
    assert_eq!(meta["aggregation"], "pooled_shots");
    assert_eq!(meta["protocol"], "time_reversal");
}

#[test]
fn pooled_rows_carry_binomial_stderr_and_plots_regenerate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        r#"
seed = 2
[model]
preset = "Heisenberg5Q"
[protocol]
kind = "multi_basis"
tau_grid = [5e-4, 1e-3]
shots_per_run = 50
runs_per_point = 8
[[noise]]
kind = "slow_shot_to_shot"
relative_sd = 0.15
seed = 2
"#,
    );
    let out = tmp.path().join("runs");
    let dir = ok(&averify(&["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    for r in rows(&dir.join("curve.csv")) {
        assert!((r[2] - binomial_stderr(r[1], r[3] as usize)).abs() < 1e-15);
    }
    let csv = fs::read_to_string(dir.join("curve.csv")).unwrap();
    let svg = svg_from_csv(&csv, "time_s", &["success_prob"], Some("stderr"), "multi basis verification").unwrap();
    assert_eq!(svg, fs::read_to_string(dir.join("curve.svg")).unwrap());
}

#[test]
fn worker_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        r#"
seed = 3
[model]
preset = "RavHeisenberg2Q"
[protocol]
kind = "randomized_analog"
tau_grid = [1e-3, 2e-3]
shots_per_run = 50
runs_per_point = 3
n_sequences = 4
[[noise]]
kind = "fast_ou"
relative_sd = 0.04
correlation_time = 2e-4
seed = 1
[compiler]
threshold = 0.98
"#,
    );
    let out = tmp.path().join("runs");
    let (c, o) = (cfg.to_str().unwrap(), out.to_str().unwrap());
    let serial = ok(&averify(&["--workers", "1", "verify", "--config", c, "--out", o]));
    let parallel = ok(&averify(&["--workers", "3", "verify", "--config", c, "--out", o]));
    assert_eq!(fs::read(serial.join("curve.csv")).unwrap(), fs::read(parallel.join("curve.csv")).unwrap());
    assert_eq!(json(&serial.join("metadata.json"))["aggregation"], "sequence_means");
    assert!(serial.join("sequences.json").exists());
}

#[test]
fn randomized_miscalibration_curve_decays() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        r#"
seed = 5
[model]
preset = "Heisenberg5Q"
[protocol]
kind = "randomized_analog"
tau_grid = [2e-3, 2e-2]
shots_per_run = 100
runs_per_point = 5
n_sequences = 4
layer_duration = 2e-5
[[noise]]
kind = "miscalibration"
relative_sd = 0.1
seed = 3
[compiler]
threshold = 0.9
"#,
    );
    let out = tmp.path().join("runs");
    let dir = ok(&averify(&["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let r = rows(&dir.join("curve.csv"));
    assert!(r[1][0] > r[0][0]);
    assert!(r[1][1] < r[0][1] - 0.1, "{r:?}");
}

#[test]
fn unknown_preset_is_reported_by_name() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "[model]\npreset = \"Ising3Q\"\n[protocol]\ntau_grid = [1e-3]\n");
    let out = averify(&["verify", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Ising3Q"));
}

#[test]
fn unreadable_config_fails() {
    let out = averify(&["verify", "--config", "/nonexistent/config.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

const DYNAMICS: &str = r#"
[model]
preset = "Ising2Q"
[dynamics]
ideal_hz = { J = 139.0, b = 227.0 }
actual_hz = { J = 250.0, b = 102.0 }
gamma_phi_hz = 38.0
initial_state = 2
t_end = 0.02
dt = 5e-5
"#;

#[test]
fn dynamics_reports_the_fidelity_crossing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "d.toml", DYNAMICS);
    let out = tmp.path().join("runs");
    let dir = ok(&averify(&["dynamics", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let t = json(&dir.join("metadata.json"))["smoothed_crossing_s"].as_f64().unwrap();
    assert!((t - 7e-3).abs() < 1.5e-3, "crossing {t}");
    for r in rows(&dir.join("populations.csv")) {
        assert_eq!(r.len(), 9);
        assert!((r[1..5].iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!((r[5..].iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn identical_closed_dynamics_keep_unit_fidelity() {
    let tmp = tempfile::tempdir().unwrap();
    let body = DYNAMICS.replace("J = 250.0, b = 102.0", "J = 139.0, b = 227.0").replace("38.0", "0.0");
    let cfg = write_config(tmp.path(), "d.toml", &body);
    let out = tmp.path().join("runs");
    let dir = ok(&averify(&["dynamics", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    for r in rows(&dir.join("fidelity.csv")) {
        assert!((r[1] - 1.0).abs() < 1e-6);
    }

    let single = DYNAMICS.replace("t_end = 0.02\ndt = 5e-5", "t_grid = [0.0]");
    let cfg = write_config(tmp.path(), "d0.toml", &single);
    let dir = ok(&averify(&["dynamics", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let r = rows(&dir.join("fidelity.csv"));
    assert_eq!(r.len(), 1);
    assert!((r[0][1] - 1.0).abs() < 1e-12);
}

const COMPILE: &str = r#"
seed = 4
[model]
preset = "Ising2Q"
[compile]
n_steps = 30
tau = 2e-3
initial_state = 1
[compiler]
threshold = 0.98
[protocol]
shots_per_run = 200
runs_per_point = 10
"#;

#[test]
fn compiled_sequences_replay_and_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", COMPILE);
    let out = tmp.path().join("runs");
    let (c, o) = (cfg.to_str().unwrap(), out.to_str().unwrap());
    let a = ok(&averify(&["compile", "--config", c, "--out", o]));
    let b = ok(&averify(&["compile", "--config", c, "--out", o]));
    let (sa, sb) = (json(&a.join("sequence.json")), json(&b.join("sequence.json")));
    assert_eq!(sa["status"], "converged");
    assert!(sa["replayed_population"].as_f64().unwrap() >= 0.98 - 1e-9);
    assert_eq!(sa["sequence"]["forward_layers"], 30);
    assert_eq!(without_timestamp(sa), without_timestamp(sb));

    let seq = a.join("sequence.json");
    let v = ok(&averify(&["verify", "--config", c, "--out", o, "--sequence", seq.to_str().unwrap()]));
    let r = rows(&v.join("curve.csv"));
    assert_eq!(r.len(), 1);
    assert!(r[0][1] >= 0.95);
    assert_eq!(r[0][3], 2000.0);
    assert!((r[0][2] - binomial_stderr(r[0][1], 2000)).abs() < 1e-15);
}

#[test]
fn exact_compilation_exhausts_the_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let body = COMPILE.replace("threshold = 0.98", "threshold = 1.0\nmax_steps = 500\nn_workers = 2");
    let cfg = write_config(tmp.path(), "c.toml", &body);
    let out = tmp.path().join("runs");
    let res = averify(&["compile", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let record = json(&out.join("run-0000").join("sequence.json"));
    assert_eq!(record["status"], "no_convergence");
    assert_eq!(record["steps_used"], 500);
    assert!(record["best_population"].as_f64().unwrap() < 1.0);
}

#[test]
fn subset_counts() {
    let stdout = |args: &[&str]| String::from_utf8(averify(args).stdout).unwrap();
    assert_eq!(stdout(&["subsets", "--rows", "6", "--cols", "6"]), "edges 60\npairs 3540\n");
    assert_eq!(stdout(&["subsets", "--mode", "unordered_disjoint"]), "edges 60\npairs 1622\n");
    assert_eq!(stdout(&["subsets", "--rows", "2", "--cols", "1", "--mode", "unordered_distinct"]), "edges 1\npairs 0\n");

    let tmp = tempfile::tempdir().unwrap();
    let list = tmp.path().join("pairs.json");
    let out = averify(&["subsets", "--mode", "unordered_disjoint", "--list", list.to_str().unwrap()]);
    assert!(out.status.success());
    let v = json(&list);
    assert_eq!(v["count"], 1622);
    assert_eq!(v["pairs"].as_array().unwrap().len(), 1622);
}
