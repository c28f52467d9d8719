//! Pipeline-wide plain-text matrix format.
//!
//! CSV with no header, one matrix row per line, `,` delimiter, `.` decimal
//! separator, LF line endings. Values are written with 17 significant digits
//! so a write/read round trip reproduces every f64 bit-exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Formats one value for the matrix text format.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_matrix<W: Write>(w: &mut W, m: &DMatrix<f64>) -> Result<()> {
    let mut line = String::new();
    for i in 0..m.nrows() {
        line.clear();
        for j in 0..m.ncols() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format_float(m[(i, j)]));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn read_matrix<R: Read>(r: R) -> Result<DMatrix<f64>> {
    let reader = BufReader::new(r);
    let mut entries: Vec<f64> = Vec::new();
    let mut ncols = 0usize;
    let mut nrows = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.is_empty() {
            continue;
        }
        let mut row_len = 0usize;
        for tok in trimmed.split(',') {
            let value = tok
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(format!("invalid number {tok:?}"), Some(idx + 1)))?;
            entries.push(value);
            row_len += 1;
        }
        if nrows == 0 {
            ncols = row_len;
        } else if row_len != ncols {
            return Err(Error::parse(
                format!("row has {row_len} values, expected {ncols}"),
                Some(idx + 1),
            ));
        }
        nrows += 1;
    }
    if nrows == 0 {
        return Err(Error::parse("empty matrix file", None));
    }
    Ok(DMatrix::from_row_iterator(nrows, ncols, entries))
}

/// Reads a single-column matrix as a vector.
pub fn read_vector<R: Read>(r: R) -> Result<DVector<f64>> {
    let m = read_matrix(r)?;
    if m.ncols() != 1 {
        return Err(Error::parse(
            format!("expected a single column, found {}", m.ncols()),
            None,
        ));
    }
    Ok(DVector::from_column_slice(m.column(0).as_slice()))
}

pub fn write_vector<W: Write>(w: &mut W, v: &DVector<f64>) -> Result<()> {
    let m = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    write_matrix(w, &m)
}

pub fn write_matrix_file(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| named(path, e))?);
    write_matrix(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn read_matrix_file(path: &Path) -> Result<DMatrix<f64>> {
    let f = File::open(path).map_err(|e| named(path, e))?;
    read_matrix(f).map_err(|e| in_file(path, e))
}

pub fn write_vector_file(path: &Path, v: &DVector<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| named(path, e))?);
    write_vector(&mut w, v)?;
    w.flush()?;
    Ok(())
}

pub fn read_vector_file(path: &Path) -> Result<DVector<f64>> {
    let f = File::open(path).map_err(|e| named(path, e))?;
    read_vector(f).map_err(|e| in_file(path, e))
}

fn named(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { message, line } => {
            Error::parse(format!("{}: {message}", path.display()), line)
        }
        other => other,
    }
}
