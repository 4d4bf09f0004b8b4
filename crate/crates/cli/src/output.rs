//! Output sinks and number formatting shared by the subcommands.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

/// A buffered writer to `path`, or to stdout.
pub fn open(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Shortest round-tripping representation; `-Inf`/`Inf`/`NaN` spelled out.
pub fn num(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-Inf".to_string()
    } else if v == f64::INFINITY {
        "Inf".to_string()
    } else if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v}")
    }
}

/// Writes `# key=value` provenance lines.
pub fn header(out: &mut dyn Write, command: &str, fields: &[(&str, String)]) -> io::Result<()> {
    writeln!(out, "# sparse-poisson {command} {}", env!("CARGO_PKG_VERSION"))?;
    for (k, v) in fields {
        writeln!(out, "# {k}={v}")?;
    }
    Ok(())
}
