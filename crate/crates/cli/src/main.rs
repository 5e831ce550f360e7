//! `bilevel`: penalized solves, ε-continuations, brute-force oracles and
//! rate studies for pessimistic bilevel programs.
//!
//! Exit codes: 0 success, 2 completed with a soft failure (unconverged
//! solve, monotonicity violation, invalid certificate, inconclusive rate),
//! 1 configuration or input error.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "bilevel", version, about = "Penalized selection solver for pessimistic bilevel programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Maximize the penalized leader objective for one epsilon.
    Solve(SolveArgs),
    /// Solve along a geometric epsilon schedule and check monotonicity.
    Continuation(ContinuationArgs),
    /// Brute-force the three-level pessimistic problem.
    Oracle(OracleArgs),
    /// Continuation + oracle + gap-rate fit + certificate in one report.
    Rates(RatesArgs),
    /// Check positivity, convexity and gradients of a problem by sampling.
    Validate(ValidateArgs),
    /// Print a problem as JSON.
    Export(ExportArgs),
    /// List available problems.
    List(ListArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignArg {
    Pessimistic,
    Optimistic,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Registry name (see `list`) or path to a problem JSON file.
    #[arg(long)]
    problem: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for report files; reports go to stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Directory of extra problem JSON files to register.
    #[arg(long)]
    registry: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = SignArg::Pessimistic)]
    sign: SignArg,
    #[arg(long, default_value_t = 8)]
    multistarts: usize,
}

#[derive(Args, Debug, Clone)]
pub struct ScheduleArgs {
    #[arg(long, default_value_t = 0.1)]
    eps0: f64,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 12)]
    k: usize,
}

#[derive(Args, Debug)]
pub struct ContinuationArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[arg(long, value_enum, default_value_t = SignArg::Pessimistic)]
    sign: SignArg,
    /// Also extrapolate the limit value (needs k ≥ 3).
    #[arg(long)]
    limit: bool,
    /// Monotonicity slack.
    #[arg(long, default_value_t = 2e-4)]
    slack: f64,
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    #[arg(long, default_value_t = 1e-3)]
    ygrid: f64,
    #[arg(long, default_value_t = 1e-3)]
    xgrid: f64,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args, Debug)]
pub struct RatesArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 0.1)]
    eps0: f64,
    /// Default spaces ten points three per decade, ε ∈ [1e-4, 1e-1].
    #[arg(long, default_value_t = 10f64.powf(-1.0 / 3.0))]
    rho: f64,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 0.15)]
    tau: f64,
    /// Certificate tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Certificate and strong-slope sample count.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
pub struct ListArgs {
    /// Directory of extra problem JSON files to register.
    #[arg(long)]
    dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Continuation(a) => commands::continuation(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::Rates(a) => commands::rates(a),
        Command::Validate(a) => commands::validate(a),
        Command::Export(a) => commands::export(a),
        Command::List(a) => commands::list(a),
    };
    match outcome {
        Ok(commands::Status::Ok) => ExitCode::SUCCESS,
        Ok(commands::Status::SoftFail(reasons)) => {
            for r in reasons {
                eprintln!("warning: {r}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
