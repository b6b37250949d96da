//! `srec`: runs spectra, detection, classification, the property suite and
//! simultaneous return searches, and writes JSON-lines reports.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use srec_core::diophantine::{self, AngleSystem, ReturnMethod};
use srec_core::recurrence::{self, DetectionParams};
use srec_core::verdict::{self, ClassifyConfig, SuiteSizes};
use srec_core::{spectral, Error, OperatorSpec, VectorState};

const SCHEMA: u32 = 1;
const OUTPUT_DIR_VAR: &str = "SREC_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "srec", version, about = "Super-recurrence laboratory for linear operators on C^n")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral report per operator.
    Spectrum(ConfigArgs),
    /// Recurrence and super-recurrence verdicts per (operator, vector).
    Detect(ConfigArgs),
    /// Operator-level classification.
    Classify(ConfigArgs),
    /// Seeded property suite.
    Suite {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Largest generated dimension.
        #[arg(long, default_value_t = 6)]
        dims: usize,
        /// Cases per property.
        #[arg(long, default_value_t = 50)]
        cases: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Smallest simultaneous return time of n·θ near the integers.
    Returns {
        /// Comma-separated angles in turns.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        thetas: Vec<f64>,
        #[arg(long)]
        delta: f64,
        #[arg(long, value_enum, default_value_t = Method::Scan)]
        method: Method,
        /// Scan bound; defaults to the pigeonhole budget.
        #[arg(long)]
        n_max: Option<u64>,
        /// Integerization scale of the lattice.
        #[arg(long, default_value_t = diophantine::DEFAULT_SCALE)]
        scale: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Experiment config (JSON).
    config: PathBuf,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(clap::Args, Clone)]
struct OutputArgs {
    /// Report path; defaults to the config, then $SREC_OUTPUT_DIR, then stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Jsonl,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Scan,
    Lll,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentConfig {
    schema: u32,
    operators: Vec<OperatorEntry>,
    #[serde(default)]
    vectors: Option<Vec<VectorState>>,
    #[serde(default = "default_params")]
    params: DetectionParams,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    probes: Option<usize>,
    #[serde(default)]
    threshold: Option<f64>,
    #[serde(default)]
    output: Option<OutputConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorEntry {
    #[serde(default)]
    id: Option<String>,
    operator: OperatorSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputConfig {
    #[serde(default)]
    path: Option<PathBuf>,
    #[serde(default)]
    format: Option<Format>,
}

fn default_params() -> DetectionParams {
    ClassifyConfig::default().params
}

/// Failures mapped onto exit codes: 1 for bad input, 2 for numerical
/// non-convergence.
enum Failure {
    Input(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConvergence { .. } | Error::Inconclusive(_) => Failure::Numerical(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::Spectrum(args) => {
            let cfg = load_config(&args.config)?;
            let mut lines = Vec::new();
            let mut diverged = false;
            for (id, op) in operators(&cfg) {
                match spectral::spectrum(op, spectral::SPREAD_TOL) {
                    Ok(report) => lines.push(json!({ "operator_id": id, "report": report })),
                    Err(e @ Error::NonConvergence { .. }) => {
                        diverged = true;
                        lines.push(json!({ "operator_id": id, "error": e.to_string() }));
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            emit("spectrum", &args.out, cfg.output.as_ref(), &lines)?;
            Ok(if diverged { ExitCode::from(2) } else { ExitCode::SUCCESS })
        }
        Command::Detect(args) => {
            let cfg = load_config(&args.config)?;
            let mut lines = Vec::new();
            for (id, op) in operators(&cfg) {
                let dim = op.validate()?;
                let vectors: Vec<VectorState> = match &cfg.vectors {
                    Some(v) => v.clone(),
                    None => (0..dim).map(|i| VectorState::basis(dim, i)).collect(),
                };
                for (j, x) in vectors.iter().enumerate() {
                    if x.dim() != dim {
                        return Err(Failure::Input(format!(
                            "vectors[{j}] has dimension {} but operator {id} has dimension {dim}",
                            x.dim()
                        )));
                    }
                    let rec = recurrence::detect_recurrence(op, x, &cfg.params)?;
                    let srec = recurrence::detect_super_recurrence(op, x, &cfg.params)?;
                    lines.push(json!({
                        "operator_id": id,
                        "vector_index": j,
                        "recurrence": rec,
                        "super_recurrence": srec,
                    }));
                }
            }
            emit("detect", &args.out, cfg.output.as_ref(), &lines)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Classify(args) => {
            let cfg = load_config(&args.config)?;
            let defaults = ClassifyConfig::default();
            let ccfg = ClassifyConfig {
                params: cfg.params,
                seed: cfg.seed,
                probes: cfg.probes.unwrap_or(defaults.probes),
                threshold: cfg.threshold.unwrap_or(defaults.threshold),
                ..defaults
            };
            let mut lines = Vec::new();
            for (id, op) in operators(&cfg) {
                let c = verdict::classify(op, &id, &ccfg)?;
                lines.push(serde_json::to_value(&c).map_err(|e| Failure::Input(e.to_string()))?);
            }
            emit("classify", &args.out, cfg.output.as_ref(), &lines)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Suite { seed, dims, cases, out } => {
            let report = verdict::property_suite(seed, SuiteSizes { max_dim: dims, cases })?;
            let body = match out.format.unwrap_or(Format::Jsonl) {
                Format::Csv => report.to_csv(),
                Format::Jsonl => report.to_json_lines()?,
            };
            write_report(&format!("suite-{seed}"), &out, None, &body)?;
            eprintln!(
                "suite seed={seed}: {} passed, {} failed{}",
                report.passed,
                report.failed,
                if report.all_pass() { " (all pass)" } else { "" }
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Returns {
            thetas,
            delta,
            method,
            n_max,
            scale,
            out,
        } => {
            let sys = AngleSystem::new(thetas, delta)?;
            let result = match method {
                Method::Scan => {
                    let budget = n_max.unwrap_or_else(|| sys.pigeonhole_budget().min(diophantine::MAX_SCAN_BUDGET));
                    diophantine::scan_return(&sys, budget)
                }
                Method::Lll => diophantine::simultaneous_return_lll(&sys, scale),
            };
            let method_name = match method {
                Method::Scan => ReturnMethod::Scan,
                Method::Lll => ReturnMethod::Lll,
            };
            let line = match result {
                Ok(sol) => json!({ "status": "found", "solution": sol }),
                Err(Error::BudgetExhausted { budget }) => {
                    json!({ "status": "budget_exhausted", "method": method_name, "budget": budget })
                }
                Err(e) => return Err(e.into()),
            };
            emit("returns", &out, None, &[line])?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        Failure::Input(format!(
            "{}:{}:{}: at `{}`: {inner}",
            path.display(),
            inner.line(),
            inner.column(),
            e.path()
        ))
    })?;
    if cfg.schema != SCHEMA {
        return Err(Failure::Input(format!(
            "{}: unsupported schema {} (expected {SCHEMA})",
            path.display(),
            cfg.schema
        )));
    }
    if cfg.operators.is_empty() {
        return Err(Failure::Input(format!("{}: `operators` is empty", path.display())));
    }
    for (i, entry) in cfg.operators.iter().enumerate() {
        entry
            .operator
            .validate()
            .map_err(|e| Failure::Input(format!("{}: at `operators[{i}].operator`: {e}", path.display())))?;
    }
    cfg.params
        .validate()
        .map_err(|e| Failure::Input(format!("{}: at `params`: {e}", path.display())))?;
    Ok(cfg)
}

fn operators(cfg: &ExperimentConfig) -> impl Iterator<Item = (String, &OperatorSpec)> {
    cfg.operators
        .iter()
        .enumerate()
        .map(|(i, e)| (e.id.clone().unwrap_or_else(|| format!("op{i}")), &e.operator))
}

#[derive(Serialize)]
struct Header<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    created_unix: u64,
}

/// JSON-lines: a header line carrying the timestamp, then the body.
fn emit(command: &str, out: &OutputArgs, config: Option<&OutputConfig>, lines: &[serde_json::Value]) -> Result<(), Failure> {
    let format = out.format.or(config.and_then(|c| c.format)).unwrap_or(Format::Jsonl);
    if format == Format::Csv {
        return Err(Failure::Input(format!("`{command}` only writes jsonl")));
    }
    let mut body = String::new();
    for l in lines {
        body.push_str(&l.to_string());
        body.push('\n');
    }
    write_report(command, out, config, &body)
}

fn write_report(name: &str, out: &OutputArgs, config: Option<&OutputConfig>, body: &str) -> Result<(), Failure> {
    let format = out.format.or(config.and_then(|c| c.format)).unwrap_or(Format::Jsonl);
    let mut text = String::new();
    if format == Format::Jsonl {
        let header = Header {
            tool: "srec",
            version: env!("CARGO_PKG_VERSION"),
            command: name,
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        text.push_str(&serde_json::to_string(&json!({ "header": header })).expect("header serializes"));
        text.push('\n');
    }
    text.push_str(body);

    let ext = if format == Format::Csv { "csv" } else { "jsonl" };
    let path = out
        .output
        .clone()
        .or_else(|| config.and_then(|c| c.path.clone()))
        .or_else(|| std::env::var_os(OUTPUT_DIR_VAR).map(|d| PathBuf::from(d).join(format!("{name}.{ext}"))));
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(&p, text)?;
            eprintln!("wrote {}", p.display());
        }
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
