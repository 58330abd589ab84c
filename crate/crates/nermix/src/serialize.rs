//! Shared machine-output conventions: UTF-8 CSV with `\n` line endings,
//! `.` decimal separator, headers always present, floats at 17 significant
//! digits so outputs round-trip bit-exactly.

use std::io::Write;

use crate::error::Result;

/// Format a float with 17 significant digits, locale-independent.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV writer with the crate's output conventions.
pub fn csv_writer<W: Write>(sink: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink)
}

/// Write one header row then all records.
pub fn write_csv<W: Write, R: IntoIterator<Item = Vec<String>>>(
    sink: W,
    header: &[&str],
    rows: R,
) -> Result<()> {
    let mut w = csv_writer(sink);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
