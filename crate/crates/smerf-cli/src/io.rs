//! CSV formats: feature files carry a single `x1..xp` header row; distance,
//! similarity, and adjacency matrices are headerless n x n grids. Floats are
//! written with the shortest round-trip representation, so read(write(v))
//! is bit-exact.

use std::path::Path;

use smerf::types::{DistanceMatrix, FeatureMatrix};

use crate::error::{CliError, Result};

fn parse_row(record: &csv::StringRecord, path: &Path, line: usize) -> Result<Vec<f64>> {
    record
        .iter()
        .map(|field| {
            field.trim().parse::<f64>().map_err(|_| {
                CliError::Data(format!(
                    "{}: line {line}: non-numeric field {field:?}",
                    path.display()
                ))
            })
        })
        .collect()
}

/// Reads a numeric CSV. A single leading header row is tolerated and skipped
/// (detected by failing to parse as numbers).
pub fn read_numeric_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        match parse_row(&record, path, idx + 1) {
            Ok(row) => rows.push(row),
            Err(e) if idx == 0 => {
                // header row; all-or-nothing so a stray bad field still errors
                if record.iter().any(|f| f.trim().parse::<f64>().is_ok()) {
                    return Err(e);
                }
            }
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(CliError::Data(format!("{}: ragged rows", path.display())));
    }
    Ok(rows)
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let rows = read_numeric_csv(path)?;
    Ok(FeatureMatrix::from_rows(&rows)?)
}

pub fn read_distance_matrix(path: &Path) -> Result<DistanceMatrix> {
    let rows = read_numeric_csv(path)?;
    Ok(DistanceMatrix::validate_default(rows)?)
}

/// Single-column file of class labels (non-negative integers).
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let rows = read_numeric_csv(path)?;
    rows.iter()
        .map(|r| {
            if r.len() != 1 {
                return Err(CliError::Data(format!(
                    "{}: label file must have one column",
                    path.display()
                )));
            }
            let v = r[0];
            if v < 0.0 || v.fract() != 0.0 {
                return Err(CliError::Data(format!(
                    "{}: labels must be non-negative integers, got {v}",
                    path.display()
                )));
            }
            Ok(v as usize)
        })
        .collect()
}

/// Single-column file of real responses.
pub fn read_responses(path: &Path) -> Result<Vec<f64>> {
    let rows = read_numeric_csv(path)?;
    rows.iter()
        .map(|r| {
            if r.len() != 1 {
                return Err(CliError::Data(format!(
                    "{}: response file must have one column",
                    path.display()
                )));
            }
            Ok(r[0])
        })
        .collect()
}

fn write_rows(path: &Path, header: Option<&[String]>, rows: &[Vec<String>]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if let Some(h) = header {
        writer.write_record(h)?;
    }
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_features(path: &Path, x: &FeatureMatrix) -> Result<()> {
    let header: Vec<String> = (1..=x.p()).map(|k| format!("x{k}")).collect();
    let rows: Vec<Vec<String>> = (0..x.n())
        .map(|i| x.row(i).iter().map(|v| v.to_string()).collect())
        .collect();
    write_rows(path, Some(&header), &rows)
}

pub fn write_matrix(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let formatted: Vec<Vec<String>> = rows
        .iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect())
        .collect();
    write_rows(path, None, &formatted)
}

pub fn write_distance_matrix(path: &Path, z: &DistanceMatrix) -> Result<()> {
    let rows: Vec<Vec<f64>> = (0..z.n()).map(|i| z.row(i).to_vec()).collect();
    write_matrix(path, &rows)
}

pub fn write_column(path: &Path, header: &str, values: &[f64]) -> Result<()> {
    let rows: Vec<Vec<String>> = values.iter().map(|v| vec![v.to_string()]).collect();
    write_rows(path, Some(&[header.to_string()]), &rows)
}

/// Generic metric/result table with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    write_rows(path, Some(&header), rows)
}
