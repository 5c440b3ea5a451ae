//! `enlargement-lab`: analyze models, run verification suites and simulate.
//!
//! Exit codes: 0 success, 1 a verification identity failed, 2 bad input.

mod scenario;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use enlargement_core::bundle::{associated_processes, classify, dual_equality_test, pseudo_stopping_test};
use enlargement_core::decompose::{thin_thick_decompose, triple_decompose};
use enlargement_core::enlargement::immersion_test;
use enlargement_core::honest::is_honest;
use enlargement_core::simulators::configure_threads;
use enlargement_core::space::SpaceDescription;
use enlargement_core::random_time::RandomTimeDescription;
use enlargement_core::verify::{verify_model, verify_random, Suite, SuiteReport};
use enlargement_core::{FilteredSpace, RandomTime};

pub const SCHEMA: &str = "enlargement-lab/report/v1";
const THREADS_VAR: &str = "ENLARGEMENT_LAB_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{message}")]
    Schema { message: String, key: Option<String> },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] enlargement_core::Error),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Schema { .. } => "schema",
            CliError::Io { .. } => "io",
            CliError::Core(_) => "model",
        }
    }

    fn diagnostic(&self) -> Value {
        let mut d = json!({ "error": self.kind(), "message": self.to_string() });
        if let CliError::Schema { key: Some(k), .. } = self {
            d["key"] = json!(k);
        }
        d
    }
}

/// Names the offending key of a serde error such as "missing field `grid`".
fn json_error(e: serde_json::Error) -> CliError {
    let message = e.to_string();
    let key = message.split('`').nth(1).map(str::to_string);
    CliError::Schema { message, key }
}

#[derive(Parser)]
#[command(name = "enlargement-lab", version, about = "Random times, enlargements and honest times on finite models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecomposeMode {
    Two,
    Triple,
}

#[derive(Subcommand)]
enum Command {
    /// Bundle, classification, decomposition, honesty and immersion of one time.
    Analyze {
        space: PathBuf,
        tau: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "two")]
        decompose: DecomposeMode,
    },
    /// Exact identity suites on a model file or on random instances.
    Verify {
        /// JSON with `space`, `tau` and optionally `bundle` overrides.
        model: Option<PathBuf>,
        #[arg(long, conflicts_with = "model")]
        random: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "all")]
        suite: Suite,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo scenario (cpp, brownian, levy or cox).
    Simulate {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct InputHash {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    inputs: Vec<InputHash>,
    seed: Option<u64>,
    tool_version: &'static str,
    /// Always null so identical invocations give identical bytes.
    timestamp: Option<String>,
    outputs: Vec<String>,
}

impl Manifest {
    fn new(command: &str, inputs: &[(&Path, &[u8])], seed: Option<u64>, outputs: Vec<String>) -> Self {
        Manifest {
            command: command.to_string(),
            inputs: inputs
                .iter()
                .map(|(p, bytes)| InputHash {
                    path: p.display().to_string(),
                    sha256: format!("{:x}", Sha256::digest(bytes)),
                })
                .collect(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION"),
            timestamp: None,
            outputs,
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn report_json(manifest: Manifest, body: Value) -> String {
    let mut v = json!({ "schema": SCHEMA, "manifest": manifest });
    if let Value::Object(map) = body {
        for (k, x) in map {
            v[k] = x;
        }
    }
    serde_json::to_string_pretty(&v).expect("reports serialize") + "\n"
}

fn load_space(bytes: &[u8]) -> Result<FilteredSpace, CliError> {
    let desc: SpaceDescription = serde_json::from_slice(bytes).map_err(json_error)?;
    Ok(FilteredSpace::from_description(&desc)?)
}

fn load_time(space: &FilteredSpace, bytes: &[u8]) -> Result<RandomTime, CliError> {
    let desc: RandomTimeDescription = serde_json::from_slice(bytes).map_err(json_error)?;
    Ok(RandomTime::from_description(space, &desc)?)
}

fn analyze(space_path: &Path, tau_path: &Path, out: &Path, mode: DecomposeMode) -> Result<ExitCode, CliError> {
    let space_bytes = read(space_path)?;
    let tau_bytes = read(tau_path)?;
    let space = load_space(&space_bytes)?;
    let tau = load_time(&space, &tau_bytes)?;

    let bundle = associated_processes(&tau, &space);
    let decomposition = match mode {
        DecomposeMode::Two => {
            let d = thin_thick_decompose(&tau, &space);
            json!({
                "mode": "two",
                "thin": d.thin.to_description(&space),
                "thick": d.thick.to_description(&space),
            })
        }
        DecomposeMode::Triple => {
            let d = triple_decompose(&tau, &space);
            json!({
                "mode": "triple",
                "accessible": d.accessible.to_description(&space),
                "inaccessible": d.inaccessible.to_description(&space),
                "thick": d.thick.to_description(&space),
            })
        }
    };
    let immersion = match immersion_test(&tau, &space) {
        Ok(r) => serde_json::to_value(r).expect("serializable"),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let bundle_path = out.join("bundle.csv");
    let report_path = out.join("report.json");
    let manifest = Manifest::new(
        "analyze",
        &[(space_path, &space_bytes), (tau_path, &tau_bytes)],
        None,
        vec![bundle_path.display().to_string(), report_path.display().to_string()],
    );
    let body = json!({
        "classification": classify(&tau, &space),
        "decomposition": decomposition,
        "honest": is_honest(&tau, &space).to_json_value(&space),
        "immersion": immersion,
        "pseudo_stopping": pseudo_stopping_test(&tau, &space),
        "dual_equality": dual_equality_test(&tau, &space),
    });
    write(&bundle_path, &bundle.to_csv(&space))?;
    write(&report_path, &report_json(manifest, body))?;
    println!("wrote {} and {}", bundle_path.display(), report_path.display());
    Ok(ExitCode::SUCCESS)
}

fn print_summary(reports: &[SuiteReport]) {
    for r in reports {
        println!(
            "{}: {} instances, {} checks, {} violations",
            r.suite,
            r.instances,
            r.checks,
            r.violations.len()
        );
        for v in &r.violations {
            let seed = v.seed.map_or("model".to_string(), |s| s.to_string());
            println!("  seed {seed} [{}] {}", v.tag, v.detail);
        }
    }
}

fn verify(
    model: Option<&Path>,
    random: Option<usize>,
    seed: u64,
    suite: Suite,
    out: Option<&Path>,
) -> Result<ExitCode, CliError> {
    let mut inputs: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    let reports = match (model, random) {
        (Some(path), _) => {
            let bytes = read(path)?;
            let v: Value = serde_json::from_slice(&bytes).map_err(json_error)?;
            let missing = |k: &str| CliError::Schema {
                message: format!("model file needs a `{k}` object"),
                key: Some(k.to_string()),
            };
            let space = load_space(v.get("space").ok_or_else(|| missing("space"))?.to_string().as_bytes())?;
            let tau = load_time(&space, v.get("tau").ok_or_else(|| missing("tau"))?.to_string().as_bytes())?;
            inputs.push((path.to_path_buf(), bytes));
            verify_model(&space, &tau, v.get("bundle"), suite)?
        }
        (None, Some(count)) => verify_random(seed, count, suite),
        (None, None) => return Err(CliError::Usage("give a model file or --random COUNT".into())),
    };
    print_summary(&reports);
    let passed = reports.iter().all(SuiteReport::passed);
    if let Some(dir) = out {
        let path = dir.join("report.json");
        let refs: Vec<(&Path, &[u8])> = inputs.iter().map(|(p, b)| (p.as_path(), b.as_slice())).collect();
        let manifest = Manifest::new(
            "verify",
            &refs,
            random.map(|_| seed),
            vec![path.display().to_string()],
        );
        let body = json!({
            "suite": suite,
            "random_instances": random,
            "passed": passed,
            "suites": reports,
        });
        write(&path, &report_json(manifest, body))?;
    }
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn simulate(path: &Path, seed: u64, n: Option<u64>, out: Option<&Path>) -> Result<ExitCode, CliError> {
    let bytes = read(path)?;
    let sc: scenario::Scenario = serde_json::from_slice(&bytes).map_err(json_error)?;
    let report = sc.run(n, seed)?;
    println!(
        "{} [{}]: {} (se {}) over n = {}",
        sc.kind(),
        report.estimator,
        report.estimate,
        report.se.map_or("undefined".to_string(), |s| s.to_string()),
        report.n
    );
    if let Some(dir) = out {
        let json_path = dir.join("report.json");
        let csv_path = dir.join("curves.csv");
        let manifest = Manifest::new(
            "simulate",
            &[(path, &bytes)],
            Some(seed),
            vec![json_path.display().to_string(), csv_path.display().to_string()],
        );
        let body = json!({ "scenario": sc.kind(), "report": report });
        write(&json_path, &report_json(manifest, body))?;
        write(&csv_path, &report.curves_csv())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => configure_threads(n),
            _ => {
                let e = CliError::Usage(format!("{THREADS_VAR} must be a positive integer"));
                eprintln!("{}", e.diagnostic());
                return ExitCode::from(2);
            }
        }
    }
    let result = match &cli.command {
        Command::Analyze {
            space,
            tau,
            out,
            decompose,
        } => analyze(space, tau, out, *decompose),
        Command::Verify {
            model,
            random,
            seed,
            suite,
            out,
        } => verify(model.as_deref(), *random, *seed, *suite, out.as_deref()),
        Command::Simulate { scenario, seed, n, out } => simulate(scenario, *seed, *n, out.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            ExitCode::from(2)
        }
    }
}
