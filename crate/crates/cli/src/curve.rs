use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use sparse_poisson::poisson::TruncationPolicy;
use sparse_poisson::risk::{log_grid, risk_curve};
use sparse_poisson::SpikeSlabPrior;

use crate::error::CliError;
use crate::output::{self, num};

#[derive(Debug, Args)]
pub struct RiskCurveArgs {
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    /// Slab scale h of the prior.
    #[arg(long)]
    pub h: f64,
    /// Explicit λ values.
    #[arg(long, value_delimiter = ',', conflicts_with = "grid", required_unless_present = "grid")]
    pub lambdas: Vec<f64>,
    /// Log-spaced grid `lo:hi:points`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("--grid expects lo:hi:points with 0 < lo < hi, got {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.parse().map_err(|_| bad())?;
    let hi: f64 = hi.parse().map_err(|_| bad())?;
    let n: usize = n.parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo && hi.is_finite() && n >= 1) {
        return Err(bad());
    }
    Ok(log_grid(lo, hi, n))
}

pub fn run(args: RiskCurveArgs) -> Result<(), CliError> {
    let grid = match &args.grid {
        Some(g) => parse_grid(g)?,
        None => args.lambdas.clone(),
    };
    let prior = SpikeSlabPrior::power(args.h, args.kappa)?;
    let rho = risk_curve(&prior, args.r, &grid, &TruncationPolicy::default())?;
    let mut out = output::open(args.output.as_deref())?;
    output::header(
        &mut *out,
        "risk-curve",
        &[("r", num(args.r)), ("kappa", num(args.kappa)), ("h", num(args.h))],
    )?;
    writeln!(out, "lambda,rho")?;
    for (l, v) in grid.iter().zip(&rho) {
        writeln!(out, "{},{}", num(*l), num(*v))?;
    }
    out.flush()?;
    Ok(())
}
