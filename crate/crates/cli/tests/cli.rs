use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn hitlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hitlab")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_two_state() {
    let out = hitlab(&["analyze", path(&fixture("two_state.json")), "--alpha", "dirac:s0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["status"], "PASSED");
    assert_eq!(v["spectral"]["lambda"].as_f64(), Some(0.5));
    assert!(v["alphas"][0]["representation_max_residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn analyze_rim_from_odd_states() {
    let out = hitlab(&["analyze", path(&fixture("rim_n1.json")), "--alpha", "uniform-set:1,3", "--horizon", "200"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["alphas"][0]["shift"]["delta"].as_f64().unwrap() + 1.0).abs() <= 1e-12);
    assert_eq!(v["alphas"][0]["csqst"]["deterministic_at"], 1);
}

#[test]
fn analyze_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("report.json");
    let csv = dir.path().join("series");
    let out = hitlab(&[
        "analyze",
        path(&fixture("random4.json")),
        "--alpha",
        "uniform",
        "--alpha",
        "mu-star",
        "--out",
        path(&out_file),
        "--csv-dir",
        path(&csv),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_file).unwrap()).unwrap();
    assert_eq!(v["status"], "PASSED");
    assert_eq!(v["alphas"].as_array().unwrap().len(), 2);
    assert_eq!(std::fs::read_dir(&csv).unwrap().count(), 4);
}

#[test]
fn embedded_alpha_is_the_default() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("chain.json");
    std::fs::write(
        &spec,
        r#"{"states":["s0","s1"],"absorbing":["s1"],"P":[[0.5,0.5],[0,1]],"alpha":{"kind":"dirac","value":"s0"}}"#,
    )
    .unwrap();
    let v = json(&hitlab(&["analyze", path(&spec)]));
    assert_eq!(v["alphas"][0]["alpha"], "dirac:s0");
}

#[test]
fn simulate_is_deterministic() {
    let chain = fixture("rim_n1.json");
    let args = ["simulate", path(&chain), "--trajectories", "100000", "--seed", "42"];
    let a = hitlab(&args);
    let b = hitlab(&args);
    assert_eq!(a.status.code(), Some(0));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn simulate_two_state_survival() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("samples.csv");
    let out = hitlab(&[
        "simulate",
        path(&fixture("two_state.json")),
        "--trajectories",
        "100000",
        "--seed",
        "7",
        "--dump-samples",
        path(&dump),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let c = v["comparisons"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["quantity"] == "survival" && c["t"] == 3)
        .unwrap()
        .clone();
    assert_eq!(c["exact"].as_f64(), Some(0.125));
    assert!(c["z"].as_f64().unwrap().abs() <= 3.0);
    let rows = std::fs::read_to_string(&dump).unwrap().lines().count();
    assert_eq!(rows, 100_001);
}

#[test]
fn rim_emits_a_loadable_chain() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("rim.json");
    let out = hitlab(&["rim", "--n", "1", "--lambda", "0.5", "--emit", path(&file)]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&file).unwrap();
    assert_eq!(text, std::fs::read_to_string(fixture("rim_n1.json")).unwrap());
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["states"].as_array().unwrap().len(), 5);
}

#[test]
fn largest_rim_is_fast() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("rim6.json");
    let start = Instant::now();
    let out = hitlab(&["rim", "--n", "6", "--lambda", "0.9", "--emit", path(&file)]);
    assert!(start.elapsed() < Duration::from_secs(10));
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    assert_eq!(v["states"].as_array().unwrap().len(), 4097);
}

#[test]
fn rim_size_zero_is_a_usage_error() {
    let out = hitlab(&["rim", "--n", "0", "--lambda", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--n"));
}

#[test]
fn verify_passes() {
    for name in ["two_state.json", "rim_n2.json"] {
        let out = hitlab(&["verify", path(&fixture(name)), "--trajectories", "20000"]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(json(&out)["status"], "PASSED");
    }
}

#[test]
fn corrupted_spec_exits_with_schema_code() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("truncated.json", r#"{"states":["a","b"],"absorbing":["b"],"P":[[0.5,0.5]"#),
        ("row.json", r#"{"states":["a","b"],"absorbing":["b"],"P":[[0.5,0.6],[0,1]]}"#),
        ("label.json", r#"{"states":["a","b"],"absorbing":["c"],"P":[[0.5,0.5],[0,1]]}"#),
    ];
    for (name, text) in cases {
        let file = dir.path().join(name);
        std::fs::write(&file, text).unwrap();
        let out = hitlab(&["verify", path(&file)]);
        assert_eq!(out.status.code(), Some(2), "{name}");
    }
    let missing = hitlab(&["analyze", path(&dir.path().join("missing.json"))]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn non_primitive_chain_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("periodic.json");
    std::fs::write(&file, r#"{"states":["a","b","g"],"absorbing":["g"],"P":[[0,0.5,0.5],[1,0,0],[0,0,1]]}"#).unwrap();
    let out = hitlab(&["analyze", path(&file)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn failed_report_exits_with_code_five() {
    let out = hitlab(&["analyze", path(&fixture("random4.json")), "--tolerance", "1e-30"]);
    assert_eq!(out.status.code(), Some(5));
    assert_eq!(json(&out)["status"], "FAILED");
}
