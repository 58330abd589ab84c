//! CSV input readers for the three commands.
//!
//! units.csv:  `area_id,y,x1,...,xq` (no intercept column; one is prepended
//!             unless --intercept=false).
//! areas.csv:  `area_id,N,xbar1,...,xbarq` (population means on the model
//!             scale, intercept excluded).
//! truth.csv:  `area_id,target`.
//! population: `area_id,y[,...]` — extra columns ignored.

use std::path::Path;

use nermix::domain::{AreaFrame, UnitRecord};
use nermix::error::{Error, Result};

fn parse_f64(field: &str, path: &Path, row: usize, col: &str) -> Result<f64> {
    field.trim().parse().map_err(|_| {
        Error::InvalidConfig(format!(
            "{}: row {}: cannot parse {} value '{}'",
            path.display(),
            row,
            col,
            field
        ))
    })
}

pub fn read_units(path: &Path, intercept: bool) -> Result<Vec<UnitRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "area_id" || &headers[1] != "y" {
        return Err(Error::InvalidConfig(format!(
            "{}: expected header area_id,y,x1,...",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let mut x = Vec::with_capacity(row.len() - 1);
        if intercept {
            x.push(1.0);
        }
        for (j, field) in row.iter().enumerate().skip(2) {
            x.push(parse_f64(field, path, i + 2, &headers[j])?);
        }
        out.push(UnitRecord::new(
            row[0].to_string(),
            parse_f64(&row[1], path, i + 2, "y")?,
            x,
        ));
    }
    Ok(out)
}

pub fn read_areas(path: &Path, intercept: bool) -> Result<AreaFrame> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "area_id" || &headers[1] != "N" {
        return Err(Error::InvalidConfig(format!(
            "{}: expected header area_id,N,xbar1,...",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let n: u64 = row[1].trim().parse().map_err(|_| {
            Error::InvalidConfig(format!(
                "{}: row {}: cannot parse N value '{}'",
                path.display(),
                i + 2,
                &row[1]
            ))
        })?;
        let mut xbar = Vec::with_capacity(row.len() - 1);
        if intercept {
            xbar.push(1.0);
        }
        for (j, field) in row.iter().enumerate().skip(2) {
            xbar.push(parse_f64(field, path, i + 2, &headers[j])?);
        }
        rows.push((row[0].to_string(), n, xbar));
    }
    AreaFrame::new(rows)
}

/// `(area_id, value)` rows of a two-or-more-column CSV; the second column is
/// taken as the value.
pub fn read_area_values(path: &Path) -> Result<Vec<(String, f64)>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "area_id" {
        return Err(Error::InvalidConfig(format!(
            "{}: expected header area_id,<value>,...",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        out.push((
            row[0].to_string(),
            parse_f64(&row[1], path, i + 2, &headers[1])?,
        ));
    }
    Ok(out)
}
