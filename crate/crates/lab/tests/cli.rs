use std::fs;
use std::path::Path;
use std::process::Command;

use monge_lab::config::{ExperimentConfig, Overrides, Suite};
use monge_lab::formats::{read_csv, read_report};
use monge_lab::{run, Error};
use serde_json::Value;

fn monge(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_monge")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> =
        fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    names
}

#[test]
fn empty_suites_echo_the_config_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { output_dir: dir.path().join("out"), suites: vec![], ..Default::default() };
    let summary = run(&cfg).unwrap();
    assert!(summary.passed && summary.cells.is_empty());
    assert_eq!(summary.exit_code(), 0);
    assert_eq!(files(&cfg.output_dir), ["config.json"]);
    let echo = read_report::<Value>(&cfg.output_dir.join("config.json")).unwrap();
    assert_eq!(echo.header.schema, "v1");
    assert_eq!(echo.header.config_hash, cfg.hash());
    assert_eq!(echo.payload["suites"], Value::Array(vec![]));
}

#[test]
fn unwritable_output_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = ExperimentConfig { output_dir: blocker.join("out"), ..Default::default() };
    assert!(matches!(run(&cfg), Err(Error::IoFailure { .. })));
}

#[test]
fn book_shift_selection_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let (code, stdout) = monge(&["select", "--out", out.to_str().unwrap(), "--oracle"]);
    assert_eq!(code, 0, "{stdout}");
    let report = read_report::<Value>(&out.join("selection_book-shift_d1_s0.json")).unwrap();
    let cert = &report.payload["certificate"];
    assert_eq!(cert["stabilized"], true);
    for gap in cert["gaps"].as_array().unwrap() {
        assert!(gap.as_f64().unwrap().abs() <= 1e-8);
    }
    assert!(report.payload["optimal_face"]["dimension"].as_u64().unwrap() >= 1);
    let (columns, rows) = read_csv(&out.join("selection_book-shift_d1_s0_plan.csv")).unwrap();
    assert_eq!(columns, ["source", "target", "mass"]);
    assert_eq!(rows, (0..4).map(|i| vec![i as f64, i as f64, 0.25]).collect::<Vec<_>>());
    let header = fs::read_to_string(out.join("selection_book-shift_d1_s0_plan.csv")).unwrap();
    assert!(header.starts_with(&format!("# schema=v1 config_hash={}", report.header.config_hash)));
    assert!(stdout.contains("\"stabilized\":true"));
}

#[test]
fn flags_override_file_override_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(&path, r#"{"seeds": [4, 5], "workers": 3, "measures": {"cells": 16}}"#).unwrap();
    let o = Overrides { seed: Some(9), ..Default::default() };
    let cfg = ExperimentConfig::resolve(Some(&path), &o).unwrap();
    assert_eq!(cfg.seeds, [9]);
    assert_eq!(cfg.workers, 3);
    assert_eq!(cfg.measures.cells, 16);
    assert_eq!(cfg.measures.atoms, ExperimentConfig::default().measures.atoms);
    fs::write(&path, r#"{"sedes": [1]}"#).unwrap();
    assert!(matches!(ExperimentConfig::resolve(Some(&path), &o), Err(Error::ConfigError(_))));
}

#[test]
fn exit_status_separates_config_errors_from_failed_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    assert_eq!(monge(&["run", "--out", out, "--fixture", "nonesuch"]).0, 2);
    assert_eq!(monge(&["run", "--epsilons", "1e-1:oops", "--out", out]).0, 2);
    // Measures of different dimension fail their cell, not the run.
    let fx = dir.path().join("fx");
    let fx = fx.to_str().unwrap();
    let (_, one) = monge(&["fixtures", "--fixture", "identity", "--dim", "1", "--out", fx]);
    let (_, two) = monge(&["fixtures", "--fixture", "identity", "--dim", "2", "--out", fx]);
    let src = one.lines().next().unwrap().to_string();
    let tgt = two.lines().next().unwrap().to_string();
    let (code, stdout) = monge(&["select", "--src", &src, "--tgt", &tgt, "--out", out]);
    assert_eq!(code, 1);
    assert!(stdout.starts_with("ERROR selection files"), "{stdout}");
}

#[test]
fn fixture_files_feed_the_selection() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fx");
    let (code, stdout) =
        monge(&["fixtures", "--fixture", "gaussian-pair", "--dim", "2", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let paths: Vec<&str> = stdout.lines().collect();
    assert_eq!(paths.len(), 2);
    let run_dir = dir.path().join("sel");
    let (code, stdout) = monge(&[
        "select",
        "--src",
        paths[0],
        "--tgt",
        paths[1],
        "--epsilons",
        "1e-1:1e-3:geometric",
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stdout}");
    let report = read_report::<Value>(&run_dir.join("selection_files_d0_s0.json")).unwrap();
    assert_eq!(report.payload["dim"], 2);
    assert_eq!(report.payload["epsilons"].as_array().unwrap().len(), 5);

    let (code, listing) = monge(&["fixtures"]);
    assert_eq!(code, 0);
    for name in ["book-shift", "gaussian-pair", "split-witness", "identity"] {
        assert!(listing.contains(name));
    }
}

#[test]
fn diagnose_detects_the_split_witness() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let (code, stdout) = monge(&["diagnose", "--fixture", "split-witness", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");
    let report = read_report::<Value>(&out.join("diagnostics_split-witness_d1_s0.json")).unwrap();
    assert_eq!(report.payload["selected"]["graphness"]["split_sources"], 1);
    let (columns, rows) = read_csv(&out.join("ratio_split-witness_d1_s0_full.csv")).unwrap();
    assert_eq!(columns, ["delta", "ratio", "stderr"]);
    assert!(rows.iter().all(|r| r[1] == 1.0));
}

#[test]
fn cells_cover_dims_and_seeds_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        output_dir: dir.path().join("out"),
        dims: vec![1, 2],
        seeds: vec![0, 1],
        suites: vec![Suite::Diagnostics],
        workers: 2,
        measures: monge_lab::config::MeasureConfig { fixture: "gaussian-pair".into(), ..Default::default() },
        ..Default::default()
    };
    let summary = run(&cfg).unwrap();
    assert!(summary.passed);
    let order: Vec<(usize, u64)> = summary.cells.iter().map(|c| (c.dim, c.seed)).collect();
    assert_eq!(order, [(1, 0), (1, 1), (2, 0), (2, 1)]);
    let saved = read_report::<Value>(&cfg.output_dir.join("summary.json")).unwrap();
    assert_eq!(saved.payload["passed"], true);
    assert_eq!(saved.payload["cells"].as_array().unwrap().len(), 4);
}
