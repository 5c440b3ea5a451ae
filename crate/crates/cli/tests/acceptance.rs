//! End-to-end acceptance run through the binary. Prints one PASS/FAIL line
//! per criterion and fails if any line fails.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use serde_json::Value;

const CORPUS_SEED: &str = "7";
const CORPUS_SIZE: usize = 200;
const IDENTITY_BUDGET: Duration = Duration::from_secs(60);
const MC_BUDGET: Duration = Duration::from_secs(300);
const Z_MAX: f64 = 3.0;
const MC_SEED: &str = "2024";

fn bin(threads: &str) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_enlargement-lab"));
    c.env("ENLARGEMENT_LAB_THREADS", threads);
    c
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).expect("report written")).expect("report is JSON")
}

struct Ledger {
    failed: Vec<&'static str>,
}

impl Ledger {
    fn line(&mut self, name: &'static str, ok: bool, detail: String) {
        // straight to stderr so the lines survive libtest output capture
        let _ = writeln!(std::io::stderr(), "{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed.push(name);
        }
    }
}

/// Violations of one suite as `seed [tag]` strings.
fn suite_line(report: &Value, suite: &str) -> (bool, String) {
    let s = report["suites"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["suite"] == suite)
        .unwrap_or_else(|| panic!("suite {suite} missing"));
    let violations = s["violations"].as_array().unwrap();
    let instances = s["instances"].as_u64().unwrap();
    let shown: Vec<String> = violations
        .iter()
        .take(3)
        .map(|v| format!("{} [{}]", v["seed"], v["tag"].as_str().unwrap()))
        .collect();
    (
        violations.is_empty() && instances == CORPUS_SIZE as u64,
        format!("{instances} instances, {} checks, {} violations", s["checks"], violations.len())
            + &if shown.is_empty() { String::new() } else { format!(": {}", shown.join(", ")) },
    )
}

fn simulate(name: &str, dir: &Path, threads: &str) -> (Value, Duration) {
    let start = Instant::now();
    let out = bin(threads)
        .args(["simulate", scenario(name).to_str().unwrap(), "--seed", MC_SEED, "--out"])
        .arg(dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (read_json(&dir.join("report.json")), start.elapsed())
}

fn z(report: &Value, target: f64) -> f64 {
    let est = report["estimate"].as_f64().unwrap();
    match report["se"].as_f64() {
        Some(se) if se > 0.0 => (est - target).abs() / se,
        _ if (est - target).abs() < 1e-12 => 0.0,
        _ => f64::INFINITY,
    }
}

fn max_curve_z(report: &Value) -> f64 {
    let mut worst = 0.0f64;
    for p in report["curves"][0]["points"].as_array().unwrap() {
        let d = (p["estimate"].as_f64().unwrap() - p["benchmark"].as_f64().unwrap()).abs();
        let se = p["se"].as_f64().unwrap_or(0.0);
        let zp = if se > 0.0 {
            d / se
        } else if d < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(zp);
    }
    worst
}

#[test]
fn acceptance() {
    let mut ledger = Ledger { failed: Vec::new() };
    let work = tempfile::tempdir().unwrap();

    // exact suites on the pinned random corpus
    let verify_dir = work.path().join("verify");
    let start = Instant::now();
    let out = bin("1")
        .args(["verify", "--random", &CORPUS_SIZE.to_string(), "--seed", CORPUS_SEED, "--suite", "all", "--out"])
        .arg(&verify_dir)
        .output()
        .unwrap();
    let elapsed = start.elapsed();
    assert_ne!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&verify_dir.join("report.json"));
    let (ok, detail) = suite_line(&report, "bundle");
    ledger.line(
        "exact identity suite",
        ok && elapsed < IDENTITY_BUDGET,
        format!("{detail}; all suites in {:.1}s (budget {}s)", elapsed.as_secs_f64(), IDENTITY_BUDGET.as_secs()),
    );
    for (name, suite) in [
        ("decomposition suite", "decomposition"),
        ("drift suite", "drift"),
        ("honest suite", "honest"),
        ("immersion suite", "immersion"),
    ] {
        let (ok, detail) = suite_line(&report, suite);
        ledger.line(name, ok, detail);
    }

    // Monte Carlo against closed forms and the exact twin
    let (brownian, b_time) = simulate("brownian.json", &work.path().join("brownian"), "1");
    let (cpp, _) = simulate("cpp.json", &work.path().join("cpp"), "1");
    let (cox, _) = simulate("cox.json", &work.path().join("cox"), "1");
    let zb = z(&brownian["report"], 0.5);
    let zc = z(&cpp["report"], 1.0);
    let zx = max_curve_z(&cox["report"]);
    ledger.line(
        "monte carlo",
        zb <= Z_MAX && zc <= Z_MAX && zx <= Z_MAX && b_time < MC_BUDGET,
        format!(
            "brownian P(tau>1/2) = {} z {zb:.2} in {:.1}s; cpp thin mass = {} z {zc:.2}; cox max z {zx:.2} (limit {Z_MAX})",
            brownian["report"]["estimate"],
            b_time.as_secs_f64(),
            cpp["report"]["estimate"],
        ),
    );

    // identical invocations, including a different worker count, give identical bytes
    let mut identical = true;
    let mut compared = 0;
    for (name, threads) in [("cox.json", "3"), ("levy.json", "2")] {
        let dir = work.path().join(format!("repro-{name}"));
        simulate(name, &dir, "1");
        let first = (std::fs::read(dir.join("report.json")).unwrap(), std::fs::read(dir.join("curves.csv")).unwrap());
        simulate(name, &dir, threads);
        let second = (std::fs::read(dir.join("report.json")).unwrap(), std::fs::read(dir.join("curves.csv")).unwrap());
        identical &= first == second;
        compared += 2;
    }
    let dir = work.path().join("repro-verify");
    let mut runs = Vec::new();
    for threads in ["1", "3"] {
        bin(threads)
            .args(["verify", "--random", "20", "--seed", "11", "--out"])
            .arg(&dir)
            .output()
            .unwrap();
        runs.push(std::fs::read(dir.join("report.json")).unwrap());
    }
    identical &= runs[0] == runs[1];
    compared += 1;
    ledger.line("reproducibility", identical, format!("{compared} output files compared byte for byte"));

    assert!(ledger.failed.is_empty(), "failed: {:?}", ledger.failed);
}
