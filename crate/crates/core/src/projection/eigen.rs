use ndarray::{Array1, Array2};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub eigenvalue: f64,
    /// Unit norm, first nonzero component positive.
    pub eigenvector: Vec<f64>,
    pub iterations: usize,
}

/// Dominant (largest magnitude) eigenpair of a symmetric matrix by power
/// iteration from the all-ones vector.
///
/// Stops once `|S v - lambda v|_inf <= tol * |lambda|`, with `lambda` the
/// Rayleigh quotient of the current unit iterate.
pub fn power_iteration(s: &Array2<f64>, tol: f64, max_iter: usize) -> Result<EigenPair> {
    let (rows, cols) = s.dim();
    if rows != cols || rows == 0 {
        return Err(Error::InvalidArgument(format!(
            "power iteration needs a non-empty square matrix, got {rows}x{cols}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "matrix has non-finite entries".into(),
        ));
    }
    let scale = s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for i in 0..rows {
        for j in (i + 1)..rows {
            if (s[[i, j]] - s[[j, i]]).abs() > 1e-12 * scale {
                return Err(Error::InvalidArgument(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }

    let mut v = Array1::from_elem(rows, 1.0 / (rows as f64).sqrt());
    let mut lambda = 0.0;
    for it in 1..=max_iter {
        let w = s.dot(&v);
        lambda = v.dot(&w);
        let residual = w
            .iter()
            .zip(v.iter())
            .fold(0.0f64, |a, (wi, vi)| a.max((wi - lambda * vi).abs()));
        if residual <= tol * lambda.abs() {
            return Ok(EigenPair {
                eigenvalue: lambda,
                eigenvector: sign_normalized(v.to_vec()),
                iterations: it,
            });
        }
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            // v lies in the null space; every direction there has eigenvalue 0.
            return Ok(EigenPair {
                eigenvalue: 0.0,
                eigenvector: sign_normalized(v.to_vec()),
                iterations: it,
            });
        }
        v = w / norm;
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        eigenvalue: lambda,
        eigenvector: sign_normalized(v.to_vec()),
    })
}

fn sign_normalized(mut v: Vec<f64>) -> Vec<f64> {
    if v.iter().find(|x| **x != 0.0).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}
