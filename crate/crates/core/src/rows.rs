//! Row-major `Vec<Vec<f64>>` conversions used by the JSON file formats.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>> {
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::Parse(format!(
            "matrix row has {} entries, expected {ncols}",
            bad.len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Infers the column count from the first row.
pub fn from_rows_auto(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    from_rows(rows, rows.first().map_or(0, Vec::len))
}
