use std::path::{Path, PathBuf};

use clap::Args;
use csv::{ReaderBuilder, StringRecord};

use sparse_poisson::sets::calibrate;
use sparse_poisson::sim::{method_proposed, ScaleRule, SparsityRule};
use sparse_poisson::{CountPredictive, CountVector, SamplingRatios};

use crate::error::CliError;
use crate::output::{self, num};

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// CSV with a header row; one row per coordinate.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Column holding identifiers (row numbers are used if it is absent).
    #[arg(long, default_value = "id")]
    pub id_column: String,
    /// Column holding the current counts.
    #[arg(long, default_value = "x")]
    pub x_column: String,
    /// Common sampling ratio.
    #[arg(long, conflicts_with = "r_column", required_unless_present = "r_column")]
    pub r: Option<f64>,
    /// Column holding per-coordinate sampling ratios.
    #[arg(long)]
    pub r_column: Option<String>,
    /// Extra count columns from earlier periods, used only by `--sparsity count-gt1`.
    #[arg(long, value_delimiter = ',')]
    pub period_columns: Vec<String>,
    #[arg(long, default_value_t = 0.1)]
    pub kappa: f64,
    /// auto-lstar | auto-lbar | fixed:<h>
    #[arg(long, default_value = "auto-lstar")]
    pub scale: String,
    /// count | count-gt1 | kmeans2 | fixed:<s>
    #[arg(long, default_value = "count")]
    pub sparsity: String,
    /// Level of the joint prediction set.
    #[arg(long, default_value_t = 0.9)]
    pub alpha: f64,
    /// Recorded for provenance; the calibration itself is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

struct Table {
    ids: Vec<String>,
    x: Vec<u64>,
    r: Option<Vec<f64>>,
    periods: Vec<Vec<u64>>,
}

fn column(headers: &StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn require_column(headers: &StringRecord, name: &str) -> Result<usize, CliError> {
    column(headers, name).ok_or_else(|| CliError::Data(format!("line 1: missing column {name:?}")))
}

fn parse_count(rec: &StringRecord, idx: usize, name: &str, line: u64) -> Result<u64, CliError> {
    let cell = rec.get(idx).map(str::trim).unwrap_or("");
    if cell.is_empty() {
        return Err(CliError::Data(format!("line {line}: missing value in column {name:?}")));
    }
    cell.parse()
        .map_err(|_| CliError::Data(format!("line {line}: {name:?} must be a non-negative integer, got {cell:?}")))
}

fn read_table(path: &Path, args: &PredictArgs) -> Result<Table, CliError> {
    let mut reader = ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("line 1: {e}")))?
        .clone();
    let id_idx = column(&headers, &args.id_column);
    let x_idx = require_column(&headers, &args.x_column)?;
    let r_idx = match &args.r_column {
        Some(name) => Some(require_column(&headers, name)?),
        None => None,
    };
    let period_idx = args
        .period_columns
        .iter()
        .map(|c| require_column(&headers, c))
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Table {
        ids: Vec::new(),
        x: Vec::new(),
        r: r_idx.map(|_| Vec::new()),
        periods: vec![Vec::new(); period_idx.len()],
    };
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CliError::Data(format!("line {line}: {e}"))
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row = table.x.len() + 1;
        table.ids.push(match id_idx {
            Some(i) => rec.get(i).unwrap_or("").trim().to_string(),
            None => row.to_string(),
        });
        table.x.push(parse_count(&rec, x_idx, &args.x_column, line)?);
        if let (Some(i), Some(rs)) = (r_idx, table.r.as_mut()) {
            let cell = rec.get(i).map(str::trim).unwrap_or("");
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite() && *v > 0.0)
                .ok_or_else(|| CliError::Data(format!("line {line}: sampling ratio must be positive, got {cell:?}")))?;
            rs.push(v);
        }
        for (k, &i) in period_idx.iter().enumerate() {
            table.periods[k].push(parse_count(&rec, i, &args.period_columns[k], line)?);
        }
    }
    if table.x.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    Ok(table)
}

pub fn run(args: PredictArgs) -> Result<(), CliError> {
    let scale: ScaleRule = args.scale.parse()?;
    let sparsity: SparsityRule = args.sparsity.parse()?;
    if !(args.kappa.is_finite() && args.kappa > 0.0) {
        return Err(CliError::Usage(format!("--kappa must be positive, got {}", args.kappa)));
    }
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {}", args.alpha)));
    }
    if let Some(r) = args.r {
        if !(r.is_finite() && r > 0.0) {
            return Err(CliError::Usage(format!("--r must be positive, got {r}")));
        }
    }
    let table = read_table(&args.input, &args)?;
    let ratios = match &table.r {
        Some(rs) => SamplingRatios::per_coordinate(rs.clone())?,
        None => SamplingRatios::scalar(args.r.expect("clap enforces one ratio source"))?,
    };
    let mut periods = vec![CountVector::new(table.x.clone())?];
    for p in &table.periods {
        periods.push(CountVector::new(p.clone())?);
    }
    let fit = method_proposed(&periods, &ratios, args.kappa, scale, sparsity)?;
    let pd = &fit.density;
    let set = calibrate(pd, args.alpha)?;

    let mut out = output::open(args.output.as_deref())?;
    let ratio_source = match &args.r_column {
        Some(c) => format!("column:{c}"),
        None => format!("{}", args.r.expect("scalar ratio")),
    };
    let mut fields = vec![
        ("input", args.input.display().to_string()),
        ("r", ratio_source),
        ("kappa", num(args.kappa)),
        ("scale", scale.to_string()),
        ("sparsity", sparsity.to_string()),
        ("alpha", num(args.alpha)),
        ("seed", args.seed.to_string()),
    ];
    if let (Some(l), Some(est)) = (fit.multiplier, fit.sparsity) {
        fields.push(("L", num(l)));
        fields.push(("s_hat", est.s_hat.to_string()));
        fields.push(("eta_hat", num(est.eta_hat)));
    }
    fields.push(("h", num(fit.scale)));
    fields.push(("set_beta", num(set.beta)));
    fields.push(("set_predictive_coverage", num(set.achieved)));
    output::header(&mut *out, "predict", &fields)?;

    let mut w = csv::Writer::from_writer(out);
    let write_err = |e: csv::Error| CliError::Io(std::io::Error::other(e));
    w.write_record([
        "id", "x", "r", "omega", "mean", "median", "q05", "q25", "q75", "q95", "p_zero", "set_lo", "set_hi",
    ])
    .map_err(write_err)?;
    for i in 0..pd.len() {
        let q = |p: f64| pd.coord_quantile(i, p).map(|v| v.to_string());
        w.write_record([
            table.ids[i].clone(),
            table.x[i].to_string(),
            num(ratios.get(i)),
            num(pd.omega(i)),
            num(pd.coord_mean(i)),
            q(0.5)?,
            q(0.05)?,
            q(0.25)?,
            q(0.75)?,
            q(0.95)?,
            num(pd.p_zero(i)),
            set.lo[i].to_string(),
            set.hi[i].to_string(),
        ])
        .map_err(write_err)?;
    }
    w.flush()?;
    Ok(())
}
