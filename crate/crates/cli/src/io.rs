//! Headerless numeric CSV and JSON files.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use infhs::Dataset;
use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => CliError::io(path, std::io::Error::other(e.to_string())),
            _ => CliError::parse(path, &e),
        })?;
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(CliError::parse(path, format!("row {} has {} fields, expected {c}", rows + 1, record.len())))
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| CliError::parse(path, format!("row {}: '{field}' is not a number", rows + 1)))?;
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| CliError::parse(path, "file is empty"))?;
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() != 1 {
        return Err(CliError::parse(path, format!("expected one column, found {}", m.ncols())));
    }
    Ok(m.column(0).into_owned())
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::io(path, std::io::Error::other(e.to_string()))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = writer(path)?;
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| v.to_string())).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    write_matrix(path, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}

/// A CSV table with a header line.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable output");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// `y.csv`, `X.csv` and `Z_1.csv`, `Z_2.csv`, ... up to the first gap.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let y = read_vector(&dir.join("y.csv"))?;
    let x = read_matrix(&dir.join("X.csv"))?;
    let codata = codata_paths(dir).iter().map(|p| read_matrix(p)).collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(y, x, codata))
}

fn codata_paths(dir: &Path) -> Vec<PathBuf> {
    (1..).map(|d| dir.join(format!("Z_{d}.csv"))).take_while(|p| p.is_file()).collect()
}

pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    ensure_dir(dir)?;
    write_vector(&dir.join("y.csv"), &data.y)?;
    write_matrix(&dir.join("X.csv"), &data.x)?;
    // stale sources from an earlier run would be picked up by read_dataset
    for old in codata_paths(dir) {
        fs::remove_file(&old).map_err(|e| CliError::io(&old, e))?;
    }
    for (d, z) in data.codata.iter().enumerate() {
        write_matrix(&dir.join(format!("Z_{}.csv", d + 1)), z)?;
    }
    Ok(())
}
