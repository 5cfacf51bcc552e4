//! End-to-end behaviour of the `kinbc` binary: exit codes, output files and
//! sweeps.

use std::path::Path;
use std::process::{Command, Output};

fn reference_config() -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/coplanar.toml");
    std::fs::read_to_string(path).unwrap()
}

fn small_config() -> String {
    reference_config()
        .replace("cells = [100, 100]", "cells = [20, 20]")
        .replace("dt = 0.002", "dt = 0.01")
        .replace("t_end = 10.0", "t_end = 5.0")
        .replace("fit_window = [2.0, 10.0]", "fit_window = [1.0, 5.0]")
}

fn kinbc(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    let (command, rest) = args.split_first().unwrap();
    Command::new(env!("CARGO_BIN_EXE_kinbc"))
        .arg(command)
        .arg(&cfg)
        .args(rest)
        .arg("--output-dir")
        .arg(dir)
        .env_remove("KINBC_THREADS")
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into()
}

#[test]
fn verify_rejects_non_steady_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_config().replace("[4.0, 3.0, 2.0, 6.0]", "[1.0, 2.0, 3.0, 4.0]");
    let out = kinbc(dir.path(), &cfg, &["verify"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Q(f_e)"), "{}", stderr(&out));
}

#[test]
fn verify_rejects_zero_velocity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_config().replace(
        "preset = \"coplanar\"\nspeed = 1.0\nsigma = 0.1",
        "velocities = [[1.0, 0.0], [0.0, 0.0], [0.0, 1.0], [0.0, -1.0]]",
    );
    let out = kinbc(dir.path(), &cfg, &["verify"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("origin"));
}

#[test]
fn bad_config_and_flags_exit_2_missing_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let typo = reference_config().replace("k3 = 0.1", "k4 = 0.1");
    assert_eq!(kinbc(dir.path(), &typo, &["design"]).status.code(), Some(2));
    let out = kinbc(dir.path(), &reference_config(), &["verify", "--threads", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_kinbc"))
        .args(["verify", "/nonexistent/config.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn design_rejects_large_gain_and_names_the_budget() {
    let dir = tempfile::tempdir().unwrap();
    let out = kinbc(dir.path(), &reference_config().replace("k2 = 0.1", "k2 = 10.0"), &["design"]);
    assert_eq!(out.status.code(), Some(2));
    let text = stdout(&out);
    assert!(text.contains("INADMISSIBLE") && text.contains("budget"), "{text}");
}

#[test]
fn design_zero_law_margin_is_full_budget() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_config().replace("law = \"mixed\"\nk2 = 0.1\nk3 = 0.1", "law = \"zero\"");
    let out = kinbc(dir.path(), &cfg, &["design"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = std::fs::read_to_string(dir.path().join("design.txt")).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(report.split("--- json ---").nth(1).unwrap()).unwrap();
    let alpha = json["certificate"]["alpha"].as_f64().unwrap();
    let margin = json["admissibility"]["margin"].as_f64().unwrap();
    // zero law: the margin is the lightest outgoing weight.
    // f1 leaves through x = 1 with weight alpha / 4 + e^{-1}; f2 through x = 0 with alpha / 3 + 1;
    // f3 through y = 1 with alpha / 2 + e^{-1}; f4 through y = 0 with alpha / 6 + 1.
    let expected = [alpha / 4.0 + (-1.0f64).exp(), alpha / 3.0 + 1.0, alpha / 2.0 + (-1.0f64).exp(), alpha / 6.0 + 1.0]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    assert!((margin - expected).abs() <= 1e-12 * expected, "{margin} vs {expected}");
}

#[test]
fn simulate_writes_csv_with_expected_rows_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config().replace("record_every = 1", "record_every = 7");
    let out = kinbc(dir.path(), &cfg, &["simulate"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let first = std::fs::read(dir.path().join("coplanar.csv")).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    // 500 steps recorded every 7 steps plus the initial record
    assert_eq!(text.lines().count(), 1 + 500 / 7 + 1);
    let t: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(t.windows(2).all(|w| w[1] > w[0]));

    let again = kinbc(dir.path(), &cfg, &["simulate"]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(first, std::fs::read(dir.path().join("coplanar.csv")).unwrap());

    let threaded = Command::new(env!("CARGO_BIN_EXE_kinbc"))
        .arg("simulate")
        .arg(dir.path().join("run.toml"))
        .arg("--output-dir")
        .arg(dir.path().join("threaded"))
        .env("KINBC_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(threaded.status.code(), Some(0));
    assert_eq!(first, std::fs::read(dir.path().join("threaded/coplanar.csv")).unwrap());
}

#[test]
fn simulate_zero_initial_data_flags_the_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config().replace("values = [1.0, 1.0, 1.0, 1.0]", "values = [0.0, 0.0, 0.0, 0.0]");
    let out = kinbc(dir.path(), &cfg, &["simulate"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("fit: undefined"));
}

#[test]
fn divergence_exits_1_and_keeps_partial_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config()
        .replace("k2 = 0.1", "k2 = 1000.0")
        .replace("k3 = 0.1", "k3 = 1000.0");
    let out = kinbc(dir.path(), &cfg, &["simulate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("diverged"));
    let csv = std::fs::read_to_string(dir.path().join("coplanar.csv")).unwrap();
    assert!(csv.lines().count() >= 2);
}

#[test]
fn sweep_gain_all_admissible_rows_decay() {
    let dir = tempfile::tempdir().unwrap();
    let out = kinbc(dir.path(), &reference_config(), &["sweep", "--param", "k2", "--range", "0:1.5:0.1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let table = std::fs::read_to_string(dir.path().join("sweep_k2.csv")).unwrap();
    let rows: Vec<Vec<String>> = table.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 16);
    let mut admissible = 0;
    for r in &rows {
        if r[1] == "true" {
            admissible += 1;
            assert!(r[2].parse::<f64>().unwrap() > 0.0, "row {r:?}");
        }
    }
    // bound for k2 at the selected alpha is about 1.007
    assert_eq!(admissible, 11);
}

#[test]
fn sweep_time_step_rates_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = kinbc(dir.path(), &reference_config(), &["sweep", "--param", "dt", "--range", "0.002,0.001"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let table = std::fs::read_to_string(dir.path().join("sweep_dt.csv")).unwrap();
    let nus: Vec<f64> = table.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(nus.len(), 2);
    assert!((nus[0] - nus[1]).abs() < 0.1 * nus[0].abs(), "{nus:?}");
}

#[test]
fn sweep_empty_range_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = kinbc(dir.path(), &small_config(), &["sweep", "--param", "k2", "--range", "1:0:0.1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = kinbc(dir.path(), &small_config(), &["sweep", "--param", "gamma", "--range", "0:1:0.5"]);
    assert_eq!(out.status.code(), Some(2));
}
