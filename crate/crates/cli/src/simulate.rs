use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use sparse_poisson::sim::{run_table, ScenarioSpec};

use crate::error::CliError;
use crate::output::{self, num};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON scenario file.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Overrides the number of trials in the config.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn load_config(args: &SimulateArgs) -> Result<ScenarioSpec, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.config.display())))?;
    let mut spec: ScenarioSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.config.display())))?;
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    spec.validate()?;
    Ok(spec)
}

pub fn run(args: SimulateArgs) -> Result<(), CliError> {
    let spec = load_config(&args)?;
    let summaries = run_table(&spec)?;
    let mut out = output::open(args.output.as_deref())?;
    let config = serde_json::to_string(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    output::header(
        &mut *out,
        "simulate",
        &[
            ("seed", spec.seed.to_string()),
            ("trials", spec.trials.to_string()),
            ("config", config),
        ],
    )?;
    writeln!(out, "method,metric,mean,sd")?;
    for summary in &summaries {
        for row in summary.rows() {
            let sd = row.sd.map(num).unwrap_or_default();
            writeln!(out, "{},{},{},{}", row.method, row.metric, num(row.mean), sd)?;
        }
    }
    out.flush()?;
    Ok(())
}
