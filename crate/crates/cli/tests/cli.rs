use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

use enlargement_core::bundle::associated_processes;
use enlargement_core::models::{coin_space, external_coin_time};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_enlargement-lab"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn diagnostic(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn analyze_writes_bundle_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let space = scenario("coin_space.json");
    let out = run(&[
        "analyze",
        space.to_str().unwrap(),
        scenario("coin_mixed_tau.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--decompose",
        "triple",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("bundle.csv")).unwrap();
    assert!(csv.starts_with("process,atom,time,left,value,right,slope"));
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["schema"], "enlargement-lab/report/v1");
    assert_eq!(report["classification"]["kind"], "mixed");
    assert_eq!(report["decomposition"]["mode"], "triple");
    assert_eq!(report["honest"]["honest"], false);
    assert!(report["manifest"]["timestamp"].is_null());
    let hash = format!("{:x}", Sha256::digest(std::fs::read(&space).unwrap()));
    assert_eq!(report["manifest"]["inputs"][0]["sha256"], hash.as_str());
}

#[test]
fn schema_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("space.json");
    std::fs::write(&bad, r#"{"grid":["0"],"atoms":[{"id":"a","p":"1"}]}"#).unwrap();
    let out = run(&[
        "analyze",
        bad.to_str().unwrap(),
        scenario("coin_mixed_tau.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let d = diagnostic(&out);
    assert_eq!(d["error"], "schema");
    assert_eq!(d["key"], "partitions");
}

#[test]
fn random_verification_passes() {
    let out = run(&["verify", "--random", "5", "--seed", "3", "--suite", "bundle"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("bundle: 5 instances"));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let out = run(&["verify", "--random", "1", "--suite", "everything"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));
}

#[test]
fn corrupted_compensator_fails_with_its_tag() {
    let space = coin_space();
    let tau = external_coin_time(&space);
    let mut bundle = associated_processes(&tau, &space).to_json_value(&space);
    // shift the optional compensator of atom `a` at its last knot
    let knots = bundle["Ao"]["rows"][0]["knots"].as_array_mut().unwrap();
    let last = knots.last_mut().unwrap().as_array_mut().unwrap();
    last[2] = Value::from("1/7");
    let model = serde_json::json!({
        "space": space.to_description(),
        "tau": tau.to_description(&space),
        "bundle": { "Ao": bundle["Ao"] },
    });
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    std::fs::write(&path, model.to_string()).unwrap();
    let out = run(&["verify", path.to_str().unwrap(), "--suite", "bundle"]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("[compensator:Ao=m-Z]"), "{stdout}");
}

#[test]
fn simulate_rejects_zero_samples_and_bad_scenarios() {
    let out = run(&["simulate", scenario("cox.json").to_str().unwrap(), "--n", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"kind":"cpp","params":{"rate":1}}"#).unwrap();
    let out = run(&["simulate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(diagnostic(&out)["key"], "jumps");
    std::fs::write(&bad, r#"{"kind":"heston","params":{}}"#).unwrap();
    assert_eq!(run(&["simulate", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn simulate_writes_report_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate",
        scenario("cox.json").to_str().unwrap(),
        "--n",
        "4000",
        "--seed",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["scenario"], "cox");
    assert_eq!(report["report"]["n"], 4000);
    assert_eq!(report["manifest"]["seed"], 5);
    let csv = std::fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.starts_with("Z_t by cell,")));
}

#[test]
fn thread_count_must_be_positive() {
    let out = bin()
        .env("ENLARGEMENT_LAB_THREADS", "0")
        .args(["verify", "--random", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
