//! Headerless matrix CSV: one row per line, comma separated decimals.

use std::io::{BufRead, Write};

use super::{DenseMatrix, LinalgError, Result};

/// Significant digits written per entry; enough for an exact f64 round trip.
pub const MATRIX_CSV_PRECISION: usize = 17;

pub fn write_matrix_csv<W: Write>(mut out: W, mat: &DenseMatrix) -> Result<()> {
    for i in 0..mat.rows() {
        let line = mat
            .row(i)
            .iter()
            .map(|v| format!("{:.*e}", MATRIX_CSV_PRECISION - 1, v))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_matrix_csv<R: BufRead>(input: R) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let row = trimmed
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|e| LinalgError::Csv {
                    line: idx + 1,
                    message: format!("{tok:?}: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(LinalgError::Csv {
                    line: idx + 1,
                    message: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    DenseMatrix::from_rows(&rows).map_err(|e| match e {
        LinalgError::NonFinite { row, col } => LinalgError::Csv {
            line: row + 1,
            message: format!("non-finite value in column {}", col + 1),
        },
        other => other,
    })
}
