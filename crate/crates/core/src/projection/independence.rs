use crate::ingest::{col_sums, row_sums, DataMatrix};
use crate::{Error, Result};

/// Chi-squared statistic of the table against the product of its margins,
/// `sum_ij (x_ij - E_ij)^2 / E_ij` with `E_ij = x_i x_j / total`.
///
/// Zero exactly when the table is the outer product of its row and column
/// sums (up to rounding).
pub fn chi2_independence(d: &DataMatrix) -> Result<f64> {
    if let Some(v) = d.values().iter().find(|v| **v < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "chi-squared statistic needs nonnegative data, found {v}"
        )));
    }
    let rows = row_sums(d);
    let cols = col_sums(d);
    let total: f64 = rows.iter().sum();
    if let Some(i) = rows.iter().position(|r| *r <= 0.0) {
        return Err(Error::ZeroRow(d.row_ids()[i].clone()));
    }
    if let Some(j) = cols.iter().position(|c| *c <= 0.0) {
        return Err(Error::Degenerate(format!("column {} sums to zero", j + 1)));
    }
    let mut stat = 0.0;
    for (row, ri) in d.values().outer_iter().zip(&rows) {
        let mut acc = 0.0;
        for (x, cj) in row.iter().zip(&cols) {
            let e = ri * cj / total;
            acc += (x - e) * (x - e) / e;
        }
        stat += acc;
    }
    Ok(stat)
}
