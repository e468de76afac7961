//! Matrix file I/O.
//!
//! The native format is binary: magic `MET1`, u32 row count, u32 column
//! count (both little-endian), then row-major f64 little-endian payload.
//! Files with a `.csv` extension fall back to headerless comma-separated
//! text, written with enough digits to round-trip exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"MET1";

#[derive(Debug, Error)]
pub enum MatrixIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic {found:?}, expected {MAGIC:?}")]
    BadMagic { found: [u8; 4] },
    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("dimension overflow: {0}")]
    Overflow(String),
    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

pub type IoResult<T> = std::result::Result<T, MatrixIoError>;

fn check_finite(matrix: &DMatrix<f64>) -> IoResult<()> {
    for r in 0..matrix.nrows() {
        for c in 0..matrix.ncols() {
            if !matrix[(r, c)].is_finite() {
                return Err(MatrixIoError::NonFinite { row: r, col: c });
            }
        }
    }
    Ok(())
}

fn is_csv(path: &Path) -> bool {
    path.extension().map_or(false, |e| e.eq_ignore_ascii_case("csv"))
}

/// Writes a matrix, choosing CSV or the binary format by file extension.
pub fn write_matrix(path: &Path, matrix: &DMatrix<f64>) -> IoResult<()> {
    check_finite(matrix)?;
    if is_csv(path) {
        write_csv(path, matrix)
    } else {
        write_binary(path, matrix)
    }
}

/// Reads a matrix, choosing CSV or the binary format by file extension.
pub fn read_matrix(path: &Path) -> IoResult<DMatrix<f64>> {
    if is_csv(path) {
        read_csv(path)
    } else {
        read_binary(path)
    }
}

fn write_binary(path: &Path, matrix: &DMatrix<f64>) -> IoResult<()> {
    let rows = u32::try_from(matrix.nrows())
        .map_err(|_| MatrixIoError::Overflow(format!("{} rows", matrix.nrows())))?;
    let cols = u32::try_from(matrix.ncols())
        .map_err(|_| MatrixIoError::Overflow(format!("{} columns", matrix.ncols())))?;
    let mut buf = Vec::with_capacity(12 + 8 * matrix.len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&rows.to_le_bytes());
    buf.extend_from_slice(&cols.to_le_bytes());
    for r in 0..matrix.nrows() {
        for c in 0..matrix.ncols() {
            buf.extend_from_slice(&matrix[(r, c)].to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

fn read_binary(path: &Path) -> IoResult<DMatrix<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() < 12 {
        return Err(MatrixIoError::Truncated {
            expected: 12,
            actual: bytes.len(),
        });
    }
    let mut found = [0u8; 4];
    found.copy_from_slice(&bytes[0..4]);
    if found != MAGIC {
        return Err(MatrixIoError::BadMagic { found });
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| MatrixIoError::Overflow(format!("{rows}x{cols}")))?;
    let expected = 12 + 8 * count;
    if bytes.len() != expected {
        return Err(MatrixIoError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    let mut matrix = DMatrix::zeros(rows, cols);
    for i in 0..count {
        let off = 12 + 8 * i;
        let v = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        let (r, c) = (i / cols.max(1), i % cols.max(1));
        if !v.is_finite() {
            return Err(MatrixIoError::NonFinite { row: r, col: c });
        }
        matrix[(r, c)] = v;
    }
    Ok(matrix)
}

fn write_csv(path: &Path, matrix: &DMatrix<f64>) -> IoResult<()> {
    let mut out = String::new();
    for r in 0..matrix.nrows() {
        for c in 0..matrix.ncols() {
            if c > 0 {
                out.push(',');
            }
            // Shortest decimal representation that round-trips exactly.
            out.push_str(&format!("{}", matrix[(r, c)]));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn read_csv(path: &Path) -> IoResult<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|e| MatrixIoError::Csv {
                line: idx + 1,
                msg: format!("{e}: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(MatrixIoError::NonFinite {
                    row: rows.len(),
                    col: row.len(),
                });
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(MatrixIoError::Csv {
                    line: idx + 1,
                    msg: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(MatrixIoError::Csv {
            line: 0,
            msg: "empty file".into(),
        });
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}
