//! Plot-ready CSV output.

use std::path::Path;

use crate::error::{CliError, Result};
use crate::scenario::Measurement;

pub const CSV_HEADER: [&str; 9] = [
    "kind",
    "impl",
    "n",
    "record_bytes",
    "reps",
    "median_ms",
    "min_ms",
    "max_ms",
    "aux_count",
];

fn row(m: &Measurement) -> [String; 9] {
    let s = &m.scenario;
    [
        s.kind.to_string(),
        s.imp.to_string(),
        s.n.to_string(),
        s.record_bytes.to_string(),
        s.reps.to_string(),
        format!("{:.6}", m.median_ms),
        format!("{:.6}", m.min_ms),
        format!("{:.6}", m.max_ms),
        m.aux_count.map(|c| c.to_string()).unwrap_or_default(),
    ]
}

fn csv_error(e: ::csv::Error) -> CliError {
    match e.into_kind() {
        ::csv::ErrorKind::Io(io) => CliError::Io(io),
        other => CliError::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Header plus one row per measurement, in the given order.
pub fn write_csv<W: std::io::Write>(out: W, ms: &[Measurement]) -> Result<()> {
    let mut w = ::csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_error)?;
    for m in ms {
        w.write_record(row(m)).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `ms` to a new file at `path`, replacing any existing one.
pub fn emit_csv(ms: &[Measurement], path: impl AsRef<Path>) -> Result<()> {
    write_csv(std::fs::File::create(path)?, ms)
}
