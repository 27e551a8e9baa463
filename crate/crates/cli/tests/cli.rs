use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"{
  "seed": 3,
  "denoise": {
    "width": 8, "height": 8, "instances": 2, "noise": 0.05,
    "engine": { "iterations": 6, "mcmc_steps": 12, "particles": 3,
                "annealing": [1.0, 0.01], "trace_iterations": [2, 4], "trace_nodes": [0, 9] },
    "samplers": [ { "kind": "slice" }, { "kind": "metropolis-hastings", "proposal": { "kind": "gaussian", "sigmas": [0.7] } } ]
  },
  "track": {
    "rows": 3, "cols": 3, "frames": 3, "mcmc_steps": [2, 3],
    "engine": { "iterations": 5, "mcmc_steps": 3, "particles": 4 }
  },
  "mh_sweep": { "target": "denoise", "sigmas": [0.7] }
}"#;

fn spbp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spbp")).args(args).env_remove("SPBP_OUT").output().expect("spawn spbp")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn run_ok(args: &[&str]) {
    let out = spbp(args);
    assert!(out.status.success(), "spbp {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    entries.sort();
    entries
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn denoise_is_byte_identical_across_runs_and_worker_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let cfg = cfg.to_str().unwrap();
    let outs: Vec<PathBuf> = ["a", "b", "c"].iter().map(|n| tmp.path().join(n)).collect();
    for (out, workers) in outs.iter().zip(["1", "1", "3"]) {
        run_ok(&["denoise", "--config", cfg, "--sampler", "slice", "--seed", "7", "--workers", workers, "--out", out.to_str().unwrap()]);
    }
    let a = files(&outs[0]);
    assert!(a.iter().any(|(n, _)| n == "slice_00_map.pgm"));
    assert!(a.iter().any(|(n, _)| n == "traces_slice.csv"));
    assert_eq!(a, files(&outs[1]));
    assert_eq!(a, files(&outs[2]));
}

#[test]
fn denoise_writes_both_estimators_and_risk_rows() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    run_ok(&["denoise", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    for name in ["clean.pgm", "noisy_01.pgm", "slice_01_map.pgm", "slice_01_mean.pgm", "mh-0.7_00_map.pgm"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let risk = csv_rows(&out.join("denoise_risk.csv"));
    assert_eq!(risk.len(), 3);
    assert_eq!(risk[1][0], "slice");
    assert_eq!(risk[2][0], "mh-0.7");
    assert_eq!(csv_rows(&out.join("denoise_losses.csv")).len(), 1 + 2 * 2);
}

#[test]
fn missing_config_fails_without_outputs() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let result = spbp(&["denoise", "--config", tmp.path().join("nope.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!result.status.success());
    assert!(String::from_utf8_lossy(&result.stderr).contains("nope.json"));
    assert!(!out.exists());
}

#[test]
fn invalid_alpha_fails_before_running() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#"{ "track": { "model": { "alpha": 0.0 } } }"#);
    let out = tmp.path().join("out");
    let result = spbp(&["track", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!result.status.success());
    assert!(!out.exists());
}

#[test]
fn track_writes_one_summary_cell_per_sampler_and_step_count() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    run_ok(&["track", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let summary = csv_rows(&out.join("track_summary.csv"));
    assert_eq!(summary.len(), 1 + 2 * 2);
    let cells: Vec<(&str, &str)> = summary[1..].iter().map(|r| (r[0].as_str(), r[1].as_str())).collect();
    assert_eq!(cells, [("slice", "2"), ("slice", "3"), ("mh-polar-1-0.05-0.05", "2"), ("mh-polar-1-0.05-0.05", "3")]);
    assert_eq!(csv_rows(&out.join("track_frames.csv")).len(), 1 + 4 * 3);
    assert_eq!(csv_rows(&out.join("track_scene.csv")).len(), 1 + 3 * 9);
}

#[test]
fn empty_sweep_grid_fails() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#"{ "mh_sweep": { "sigmas": [] } }"#);
    let out = tmp.path().join("out");
    let result = spbp(&["mh-sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!result.status.success());
    assert!(String::from_utf8_lossy(&result.stderr).contains("empty"));
    assert!(!out.exists());
}

#[test]
fn single_sigma_sweep_matches_denoise_with_that_sigma() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let cfg = cfg.to_str().unwrap();
    let sweep = tmp.path().join("sweep");
    let den = tmp.path().join("den");
    run_ok(&["mh-sweep", "--config", cfg, "--out", sweep.to_str().unwrap()]);
    run_ok(&["denoise", "--config", cfg, "--sampler", "mh:0.7", "--out", den.to_str().unwrap()]);
    let sweep_rows = csv_rows(&sweep.join("mh_sweep.csv"));
    let risk_rows = csv_rows(&den.join("denoise_risk.csv"));
    assert_eq!(sweep_rows.len(), 2);
    assert_eq!(sweep_rows[1][1..], risk_rows[1][1..]);
}

#[test]
fn diagnose_aggregates_per_sampler_and_iteration() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let den = tmp.path().join("den");
    run_ok(&["denoise", "--config", cfg.to_str().unwrap(), "--out", den.to_str().unwrap()]);
    let diag = tmp.path().join("diag");
    let traces = [den.join("traces_slice.csv"), den.join("traces_mh-0.7.csv")];
    run_ok(&["diagnose", traces[0].to_str().unwrap(), traces[1].to_str().unwrap(), "--out", diag.to_str().unwrap()]);
    let mean = csv_rows(&diag.join("autocorrelation_mean.csv"));
    let keys: Vec<(&str, &str)> = mean[1..].iter().map(|r| (r[0].as_str(), r[1].as_str())).collect();
    assert_eq!(keys, [("mh-0.7", "2"), ("mh-0.7", "4"), ("slice", "2"), ("slice", "4")]);
    // 2 instances x 2 nodes x 3 particles chains per (sampler, iteration).
    assert!(mean[1..].iter().all(|r| r[2] == "12"));
    assert_eq!(mean[0].len(), 4 + 20);
}

const TRACE_HEADER: &str = "sampler,instance,iteration,node,particle,step,coord,value";

fn trace_file(dir: &Path, name: &str, values: &[f64]) -> PathBuf {
    let mut text = format!("{TRACE_HEADER}\n");
    for (step, v) in values.iter().enumerate() {
        text.push_str(&format!("slice,0,1,0,0,{step},0,{v}\n"));
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn diagnose_single_chain_matches_its_aggregate() {
    let tmp = TempDir::new().unwrap();
    let values: Vec<f64> = (0..200).map(|i| ((i * 37) % 11) as f64 + 0.1 * i as f64).collect();
    let trace = trace_file(tmp.path(), "t.csv", &values);
    let diag = tmp.path().join("diag");
    run_ok(&["diagnose", trace.to_str().unwrap(), "--out", diag.to_str().unwrap()]);
    let per_chain = csv_rows(&diag.join("autocorrelation.csv"));
    let mean = csv_rows(&diag.join("autocorrelation_mean.csv"));
    assert_eq!(per_chain.len(), 2);
    assert_eq!(mean.len(), 2);
    assert_eq!(per_chain[1][6], "ok");
    assert_eq!(per_chain[1][7..], mean[1][3..]);
}

#[test]
fn diagnose_flags_short_chains_with_failure_exit() {
    let tmp = TempDir::new().unwrap();
    let trace = trace_file(tmp.path(), "short.csv", &[0.1, 0.4, 0.2, 0.3, 0.5]);
    let diag = tmp.path().join("diag");
    let result = spbp(&["diagnose", trace.to_str().unwrap(), "--out", diag.to_str().unwrap()]);
    assert!(!result.status.success());
    let per_chain = csv_rows(&diag.join("autocorrelation.csv"));
    assert_eq!(per_chain[1][6], "too-short");
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = TempDir::new().unwrap();
    let trace = trace_file(tmp.path(), "t.csv", &(0..50).map(f64::from).map(f64::sin).collect::<Vec<_>>());
    let out = Command::new(env!("CARGO_BIN_EXE_spbp"))
        .args(["diagnose", trace.to_str().unwrap()])
        .env("SPBP_OUT", tmp.path().join("root"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("root/diagnose/autocorrelation.csv").exists());
}
