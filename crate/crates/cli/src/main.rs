//! `sparse-poisson`: fit and score sparse Poisson predictive densities from
//! the command line.

mod curve;
mod error;
mod output;
mod predict;
mod simulate;
mod verify;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "sparse-poisson", version, about = "Predictive densities for sparse Poisson counts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the predictive density to a CSV of counts and write per-coordinate summaries.
    Predict(predict::PredictArgs),
    /// Run a simulation scenario from a JSON config and write a summary table.
    Simulate(simulate::SimulateArgs),
    /// Check the minimax constants at a list of sparsity levels (JSON report).
    Verify(verify::VerifyArgs),
    /// Export the coordinate risk curve as CSV.
    RiskCurve(curve::RiskCurveArgs),
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("SPARSE_POISSON_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("SPARSE_POISSON_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Predict(a) => predict::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Verify(a) => verify::run(a),
        Command::RiskCurve(a) => curve::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
