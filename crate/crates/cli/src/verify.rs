use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use sparse_poisson::poisson::TruncationPolicy;
use sparse_poisson::risk::verify_constants;

use crate::error::CliError;
use crate::output;

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    /// Sparsity levels η, each in (0, 1).
    #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4,1e-5,1e-6")]
    pub etas: Vec<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(args: VerifyArgs) -> Result<(), CliError> {
    let report = verify_constants(args.r, args.kappa, &args.etas, &TruncationPolicy::default())?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut out = output::open(args.output.as_deref())?;
    writeln!(out, "{json}")?;
    out.flush()?;
    Ok(())
}
