//! CSV files with a versioned comment header and LF line endings.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// A CSV cell: numbers print in shortest round-trip form, missing values
/// as empty fields.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

/// Writes `rows` under a `# irs-ho <kind> v<N>` comment and a column line.
pub fn write_csv(
    path: &Path,
    kind: &str,
    columns: &[&str],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "# irs-ho {kind} v{SCHEMA_VERSION}").map_err(|e| CliError::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let wrap = |e: csv::Error| CliError::Input(format!("{}: {e}", path.display()));
    w.write_record(columns).map_err(wrap)?;
    for r in rows {
        w.write_record(r).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
