//! End-to-end runs of the `sim` binary and the config loader.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flipflop_cli::config::ExperimentConfig;
use flipflop_cli::CliError;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn shipped(name: &str) -> String {
    std::fs::read_to_string(configs().join(name)).unwrap()
}

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sim")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Small, fast device run: short horizon and low truncation.
fn small_flipflop(drives: f64, events: &str) -> String {
    let text = shipped("flipflop.toml");
    let start = text.find("events = [").unwrap();
    let end = start + text[start..].find("]\n").unwrap() + 2;
    format!("{}events = {events}\n{}", &text[..start], &text[end..])
        .replace("truncation_a = 20", "truncation_a = 4")
        .replace("truncation_b = 20", "truncation_b = 4")
        .replace("n_target_a = 8.0", &format!("n_target_a = {drives:?}"))
        .replace("n_target_b = 8.0", &format!("n_target_b = {drives:?}"))
        .replace("t_end = 160.0", "t_end = 4.0")
}

#[test]
fn shipped_configs_round_trip() {
    for name in ["flipflop.toml", "memory.toml", "estimate.toml"] {
        let config = ExperimentConfig::parse(&shipped(name)).unwrap();
        let again = ExperimentConfig::parse(&config.to_toml()).unwrap();
        assert_eq!(config, again, "{name}");
    }
}

#[test]
fn small_flipflop_edits_apply() {
    let text = small_flipflop(0.0, "[]");
    let config = ExperimentConfig::parse(&text).unwrap();
    assert_eq!(config.device.truncation_a, 4);
    assert!(config.schedule.events.is_empty());
    assert_eq!(config.integrator.t_end, 4.0);
}

#[test]
fn unknown_key_is_reported_with_its_line() {
    let text = shipped("estimate.toml").replace("kappa_a = 0.1", "kappa_a = 0.1\nkapa_b = 0.1");
    let line = text.lines().position(|l| l.starts_with("kapa_b")).unwrap() + 1;
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.toml", &text);
    let out = sim(&["estimate", "--config", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("kapa_b"), "{msg}");
    assert!(msg.contains(&format!("line {line}")), "{msg}");
}

#[test]
fn negative_lifetime_names_key_and_line() {
    let text = shipped("estimate.toml").replace("qubit_t1 = 12.0", "qubit_t1 = -12.0");
    let line = text.lines().position(|l| l.starts_with("qubit_t1")).unwrap() + 1;
    match ExperimentConfig::parse(&text) {
        Err(CliError::Config(msg)) => {
            assert!(msg.contains("device.qubit_t1"), "{msg}");
            assert!(msg.starts_with(&format!("line {line}:")), "{msg}");
        }
        other => panic!("expected config error, got {other:?}"),
    }
}

#[test]
fn missing_required_key_is_a_config_error() {
    let text = shipped("estimate.toml").replace("chi_ab = 0.07\n", "");
    match ExperimentConfig::parse(&text) {
        Err(CliError::Config(msg)) => assert!(msg.contains("chi_ab"), "{msg}"),
        other => panic!("expected config error, got {other:?}"),
    }
}

#[test]
fn negative_rate_is_rejected() {
    let text = shipped("estimate.toml").replace("kappa_b = 0.1", "kappa_b = -0.1");
    assert!(matches!(ExperimentConfig::parse(&text), Err(CliError::Config(_))));
}

#[test]
fn subcommand_must_match_experiment_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(&[
        "flipflop",
        "--config",
        configs().join("estimate.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("experiment.kind"));
}

#[test]
fn estimate_reproduces_frozen_point_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(&[
        "estimate",
        "--config",
        configs().join("estimate.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = json(&dir.path().join("estimate.json"));
    // independent evaluation of the Poisson-weighted sum, n ≤ 60
    let t = report["point"]["memory_time_us"].as_f64().unwrap();
    assert!((t - 299.0319475100017).abs() < 1e-9 * t, "{t}");
    for panel in ["a", "b", "c", "d"] {
        assert!(dir.path().join(format!("sweep_{panel}.csv")).exists());
    }
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["command"], "estimate");
}

#[test]
fn undriven_second_resonator_gives_infinite_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let text = shipped("estimate.toml").replace("n_target_b = 8.0", "n_target_b = 0.0");
    let path = write(dir.path(), "nofeed.toml", &text);
    let out_dir = dir.path().join("o");
    let out = sim(&["estimate", "--config", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("inf"));
    let mut reader = csv::Reader::from_path(out_dir.join("estimate.csv")).unwrap();
    let column = reader.headers().unwrap().iter().position(|h| h == "memory_time_us").unwrap();
    let row = reader.records().next().unwrap().unwrap();
    assert_eq!(&row[column], "inf");
    assert!(json(&out_dir.join("estimate.json"))["point"]["memory_time_us"].is_null());
}

#[test]
fn synthetic_decay_is_fitted_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("time_us,n_a\n");
    for i in 0..=2000 {
        let t = i as f64 * 0.5;
        text.push_str(&format!("{t},{}\n", 7.5 * (-t / 300.0).exp() + 0.3));
    }
    let input = write(dir.path(), "series.csv", &text);
    let out_dir = dir.path().join("o");
    let out = sim(&["memory", "--input", input.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let fit = json(&out_dir.join("memory_fit.json"));
    let t = fit["memory_time"].as_f64().unwrap();
    assert!((t - 300.0).abs() < 1e-6 * 300.0, "{t}");
}

#[test]
fn malformed_series_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "series.csv", "time_us,n_a\n0,1\n0.5,x\n");
    let out = sim(&["memory", "--input", input.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"));
}

#[test]
fn single_trajectory_memory_fit_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let text = shipped("memory.toml")
        .replace("truncation_a = 20", "truncation_a = 4")
        .replace("truncation_b = 20", "truncation_b = 4")
        .replace("t_end = 1000.0", "t_end = 24.0")
        .replace("dt = 0.0005", "dt = 0.002")
        .replace("n_traj = 30", "n_traj = 1")
        .replace("bootstrap_resamples = 200", "bootstrap_resamples = 0");
    let path = write(dir.path(), "one.toml", &text);
    let out_dir = dir.path().join("o");
    let out = sim(&["memory", "--config", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let fit = json(&out_dir.join("memory_fit.json"));
    assert_eq!(fit["unreliable"], true);
    assert!(out_dir.join("trajectory_000.csv").exists());
    assert!(out_dir.join("ensemble.csv").exists());
}

#[test]
fn memory_rejects_pulses() {
    let text = shipped("memory.toml").replace("events = []", "events = [{ time = 10.0, kind = \"set\" }]");
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "pulsed.toml", &text);
    let out = sim(&["memory", "--config", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn undriven_flipflop_stays_in_vacuum() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "idle.toml", &small_flipflop(0.0, "[]"));
    let out_dir = dir.path().join("o");
    let out = sim(&["flipflop", "--config", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let mut reader = csv::Reader::from_path(out_dir.join("flipflop.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["time_us", "n_a", "n_b", "p_qa", "p_qb", "ta_fg", "tb_fg"]);
    let mut rows = 0;
    for record in reader.records() {
        let values: Vec<f64> = record.unwrap().iter().map(|v| v.parse().unwrap()).collect();
        assert_eq!(&values[1..5], &[0.0; 4]);
        // transistors rest in g: f−g population difference −1
        assert_eq!(&values[5..], &[-1.0, -1.0]);
        rows += 1;
    }
    assert_eq!(rows, 41);
    let summary = json(&out_dir.join("flipflop.json"));
    assert!(summary["jump_counts"].as_object().unwrap().values().all(|v| v == 0));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "short.toml",
        &small_flipflop(2.0, "[{ time = 1.0, kind = \"set\" }, { time = 2.5, kind = \"reset\" }]"),
    );
    let run = |name: &str, seed: &str| {
        let out_dir = dir.path().join(name);
        let out = sim(&["flipflop", "--config", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--seed", seed]);
        assert!(out.status.success(), "{}", stderr(&out));
        ["flipflop.csv", "jumps.csv"].map(|f| std::fs::read(out_dir.join(f)).unwrap())
    };
    let first = run("first", "3");
    assert_eq!(first, run("second", "3"));
    assert_ne!(first[0], run("other", "4")[0]);
}

#[test]
fn validate_passes_and_reports_each_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(&["validate", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = json(&dir.path().join("validate.json"));
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.iter().filter(|c| c["name"].as_str().unwrap().starts_with("mcwf_vs_me_random")).count(), 10);
    assert!(checks.iter().all(|c| c["passed"] == true));
}

#[test]
fn failures_map_to_documented_exit_codes() {
    assert_eq!(CliError::Config(String::new()).exit_code(), 2);
    assert_eq!(CliError::Numerical(flipflop::Error::ZeroNorm).exit_code(), 3);
    assert_eq!(CliError::Validation(String::new()).exit_code(), 4);
    let out = sim(&["estimate", "--out", "/nonexistent"]);
    assert_eq!(out.status.code(), Some(2));
}
