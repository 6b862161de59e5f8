//! Reductions whose results do not depend on the rayon thread count.
//!
//! Inputs are cut into fixed-size chunks, chunk partials are computed in
//! parallel and then combined sequentially in chunk order, so the floating
//! point summation order is the same for any pool size.

use rayon::prelude::*;

pub(crate) const CHUNK: usize = 8192;

/// Largest `f64` strictly below 1.
pub(crate) const ONE_BELOW: f64 = 1.0 - f64::EPSILON / 2.0;

pub(crate) fn sum(v: &[f64]) -> f64 {
    let partials: Vec<f64> = v.par_chunks(CHUNK).map(|c| c.iter().sum()).collect();
    partials.iter().sum()
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    sum(v) / v.len() as f64
}

/// Sum of squared deviations from `center`.
pub(crate) fn sum_sq_dev(v: &[f64], center: f64) -> f64 {
    let partials: Vec<f64> = v
        .par_chunks(CHUNK)
        .map(|c| c.iter().map(|x| (x - center) * (x - center)).sum())
        .collect();
    partials.iter().sum()
}

/// Sample standard deviation (divisor `n - 1`) around a known mean.
pub(crate) fn sample_sd(v: &[f64], mean: f64) -> f64 {
    (sum_sq_dev(v, mean) / (v.len() - 1) as f64).sqrt()
}

pub(crate) fn clamp_unit(u: f64) -> f64 {
    if u >= 1.0 {
        ONE_BELOW
    } else if u > 0.0 {
        u
    } else {
        0.0
    }
}
