//! `lmrate`: LM-rate experiments from TOML descriptions.
//!
//! Exit codes: 0 success, 1 a solve failed, 2 configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lmrate::config::{parse_experiment, ExperimentSpec, Mode};
use lmrate::experiment::{run_experiment, summary_csv, write_outputs, Row};
use lmrate::verify::run_checks;

const THREADS_VAR: &str = "LMRATE_THREADS";

#[derive(Parser)]
#[command(
    name = "lmrate",
    version,
    about = "LM rate and input-optimized LM rate for IQ-imbalanced QAM channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one (eta, theta) channel at every listed SNR.
    Solve(RunArgs),
    /// Solve the cross product of a [sweep] table.
    Sweep(RunArgs),
    /// Like `solve` with the mode forced to lm-uniform.
    Baseline(RunArgs),
    /// Check the solver against the reference oracles.
    Verify,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment description (TOML).
    config: PathBuf,
    /// Comma-separated SNR list in dB, replacing `snr_db`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    /// clm, lm-uniform or both.
    #[arg(long)]
    mode: Option<Mode>,
    /// Output grid size (a perfect square).
    #[arg(long, conflicts_with = "reference_grid")]
    grid_n: Option<usize>,
    /// Use the reference grid size for the scheme (10000, or 40000 for 256qam).
    #[arg(long)]
    reference_grid: bool,
    /// Record per-iteration residuals and write trajectory files.
    #[arg(long)]
    trajectory: bool,
    /// Output directory, replacing `output`.
    #[arg(long)]
    output: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Solve(String),
}

impl Failure {
    fn report(self) -> ExitCode {
        match self {
            Failure::Config(msg) => {
                eprintln!("lmrate: {msg}");
                ExitCode::from(2)
            }
            Failure::Solve(msg) => {
                eprintln!("lmrate: {msg}");
                ExitCode::from(1)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        return Failure::Config(msg).report();
    }
    let result = match cli.command {
        Command::Solve(args) => run(args, Kind::Solve),
        Command::Sweep(args) => run(args, Kind::Sweep),
        Command::Baseline(args) => run(args, Kind::Baseline),
        Command::Verify => verify(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_VAR} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| format!("cannot start {threads} threads: {e}"))
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Solve,
    Sweep,
    Baseline,
}

fn load(args: &RunArgs, kind: Kind) -> Result<ExperimentSpec, Failure> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut spec = parse_experiment(&text)
        .map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    match kind {
        Kind::Sweep if spec.sweep.is_none() => {
            return Err(Failure::Config("`sweep` needs a [sweep] table".into()));
        }
        Kind::Solve if spec.sweep.is_some() => {
            return Err(Failure::Config(
                "`solve` takes a [channel] table; use `sweep` for [sweep]".into(),
            ));
        }
        _ => {}
    }
    if let Some(snr) = &args.snr {
        spec.snr_db = snr.clone();
    }
    if let Some(mode) = args.mode {
        spec.mode = mode;
    }
    if kind == Kind::Baseline {
        spec.mode = Mode::LmUniform;
    }
    if let Some(n) = args.grid_n {
        spec.grid.n = n;
    }
    if args.reference_grid {
        spec.grid.n = spec.scheme.reference_grid();
    }
    if args.trajectory {
        spec.solver.record_trajectory = true;
    }
    if let Some(out) = &args.output {
        spec.output = Some(out.clone());
    }
    spec.validate()
        .map_err(|e| Failure::Config(e.to_string()))?;
    Ok(spec)
}

fn run(args: RunArgs, kind: Kind) -> Result<(), Failure> {
    let spec = load(&args, kind)?;
    let rows = run_experiment(&spec).map_err(|e| Failure::Config(e.to_string()))?;
    let table = summary_csv(&rows).map_err(|e| Failure::Solve(e.to_string()))?;
    print!("{table}");
    if let Some(dir) = &spec.output {
        write(dir, &rows)?;
    }
    let failed: Vec<&Row> = rows.iter().filter(|r| r.failed()).collect();
    for row in &failed {
        let k = &row.key;
        let why = match &row.outcome {
            Ok(r) => r
                .diagnostic
                .clone()
                .unwrap_or_else(|| "numerical failure".into()),
            Err(e) => e.clone(),
        };
        eprintln!(
            "lmrate: {} eta={} theta={} snr={} {} failed: {why}",
            k.scheme, k.eta, k.theta, k.snr_db, k.mode
        );
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Solve(format!(
            "{} of {} solves failed",
            failed.len(),
            rows.len()
        )))
    }
}

fn write(dir: &Path, rows: &[Row]) -> Result<(), Failure> {
    write_outputs(dir, rows).map_err(|e| Failure::Solve(format!("writing {}: {e}", dir.display())))
}

fn verify() -> Result<(), Failure> {
    let checks = run_checks().map_err(|e| Failure::Solve(e.to_string()))?;
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    println!(
        "{:<width$}  {:>10}  {:>9}  status",
        "check", "error", "tolerance"
    );
    for c in &checks {
        let status = if c.passed() { "pass" } else { "FAIL" };
        println!(
            "{:<width$}  {:>10.3e}  {:>9.0e}  {status}",
            c.name, c.error, c.tolerance
        );
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    if failed == 0 {
        println!("all {} checks passed", checks.len());
        Ok(())
    } else {
        Err(Failure::Solve(format!(
            "{failed} of {} checks failed",
            checks.len()
        )))
    }
}
