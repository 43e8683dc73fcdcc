//! Dense matrix files (CSV, one row per line, no header) and JSON helpers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub fn read_dense_csv<R: Read>(r: R) -> Result<DenseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut entries = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if cols.is_some_and(|c| c != record.len()) {
            return Err(Error::Parse {
                line: line + 1,
                msg: format!("expected {} columns, found {}", cols.unwrap_or(0), record.len()),
            });
        }
        cols = Some(record.len());
        for field in &record {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line: line + 1,
                msg: format!("not a number: {field:?}"),
            })?;
            entries.push(v);
        }
        rows += 1;
    }
    DenseMatrix::from_row_major(rows, cols.unwrap_or(0), &entries)
}

/// Shortest round-trip decimal representation of every entry.
pub fn write_dense_csv<W: Write>(m: &DenseMatrix, w: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    let mut row = Vec::with_capacity(m.cols());
    for i in 0..m.rows() {
        row.clear();
        row.extend((0..m.cols()).map(|j| m[(i, j)].to_string()));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn load_dense_csv(path: &Path) -> Result<DenseMatrix> {
    read_dense_csv(BufReader::new(File::open(path)?))
}

pub fn save_dense_csv(m: &DenseMatrix, path: &Path) -> Result<()> {
    write_dense_csv(m, BufWriter::new(File::create(path)?))
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn save_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}
