//! `catastrophe`: command-line front end for simulation, exact transient
//! analysis, rate functions, tail bounds, coupling and regime checks.
//!
//! Exit codes: 0 success, 2 invalid configuration or usage, 3 solver
//! failure, 4 I/O failure. Errors are one line on stderr:
//! `error: kind=<config|solver|io> message=<json string>`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{BoundKind, RateKind, SamplerKind, VerifyMode};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(String),
    Io(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Solver(_) => "solver",
            CliError::Io(_) => "io",
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Solver(m) | CliError::Io(m) => m,
        }
    }
}

impl From<catastrophe_core::Error> for CliError {
    fn from(e: catastrophe_core::Error) -> Self {
        use catastrophe_core::Error as E;
        match e {
            E::Truncation { .. } | E::ProductOverflow { .. } => CliError::Solver(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "catastrophe",
    version,
    about = "Poisson process with uniform catastrophes"
)]
pub struct Cli {
    /// Write here instead of stdout (default: $CATASTROPHE_OUT_DIR/<command>.<ext> if set).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv", global = true)]
    format: Format,
    /// JSON file of settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a path, or a terminal-state histogram over replicas.
    Simulate(SimulateArgs),
    /// Transient distribution or tail probability by uniformization.
    Exact(ExactArgs),
    /// Tabulate a rate function on an x grid.
    Rate(RateArgs),
    /// Evaluate a tail bound.
    Bounds(BoundsArgs),
    /// Run coupled pairs and report discrepancies.
    Couple(CoupleArgs),
    /// Rate curves, sandwich bounds, importance sampling or the LLN check.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    init: Option<u64>,
    #[arg(long, value_enum)]
    sampler: Option<SamplerKind>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    init: Option<usize>,
    #[arg(long)]
    n_states: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    threshold: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, ignore_case = true)]
    which: Option<RateKind>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    /// start:stop:step, both ends included.
    #[arg(long)]
    x_grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long, value_enum)]
    which: Option<BoundKind>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    z: Option<f64>,
    #[arg(long)]
    u: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    v: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CoupleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    x0: Option<u64>,
    #[arg(long)]
    y0: Option<u64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum)]
    mode: Option<VerifyMode>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    x: Option<f64>,
    /// Comma-separated horizons.
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = serde_json::to_string(e.message()).unwrap_or_default();
            eprintln!("error: kind={} message={message}", e.kind());
            ExitCode::from(e.code())
        }
    }
}
