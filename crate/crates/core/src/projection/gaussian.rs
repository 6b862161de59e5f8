//! Conventional Gaussian random mapping, kept as a contrast to the uniform
//! consensus projection: it aims at preserving pairwise distances rather than
//! producing a seriation.

use ndarray::{Array2, Axis};
use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;

use crate::ingest::DataMatrix;
use crate::rng::{stage_rng, NormalSampler, Stage};
use crate::{Error, Result};

pub const MAX_DISTORTION_PAIRS: usize = 10_000;

/// Ratio of mapped to original pairwise Euclidean distance over sampled
/// pairs, after aligning the global scale (sum of original distances over
/// sum of mapped distances). Pairs at original distance zero are counted
/// separately, and `zero_pairs_preserved` records whether they also map to
/// distance zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionReport {
    pub pairs: usize,
    pub zero_pairs: usize,
    pub zero_pairs_preserved: bool,
    pub scale: f64,
    pub min_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
    pub mean_ratio: Option<f64>,
}

/// Maps the rows through an `m x target_dim` matrix of standard normal
/// entries and rescales each mapped row to unit norm (zero rows stay zero).
pub fn gaussian_map(
    d: &DataMatrix,
    target_dim: usize,
    seed: u64,
) -> Result<(Array2<f64>, DistortionReport)> {
    if target_dim == 0 {
        return Err(Error::InvalidArgument(
            "target dimension must be >= 1".into(),
        ));
    }
    let m = d.m();
    let mut rng = stage_rng(seed, Stage::GaussianMap);
    let mut normal = NormalSampler::new();
    let r = Array2::from_shape_fn((m, target_dim), |_| normal.sample(&mut rng));
    let mut mapped = d.values().dot(&r);
    mapped
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .for_each(|mut row| {
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row /= norm;
            }
        });
    let report = distortion(d.values(), &mapped, seed);
    Ok((mapped, report))
}

fn unrank_pair(p: usize, n: usize) -> (usize, usize) {
    // Row i owns pairs (i, i+1..n); rows before i own i(2n - i - 1)/2 pairs.
    let before = |i: usize| i * (2 * n - i - 1) / 2;
    let nf = n as f64;
    let disc = (2.0 * nf - 1.0) * (2.0 * nf - 1.0) - 8.0 * p as f64;
    let mut i = (((2.0 * nf - 1.0) - disc.max(0.0).sqrt()) / 2.0)
        .floor()
        .max(0.0) as usize;
    i = i.min(n - 2);
    while i > 0 && before(i) > p {
        i -= 1;
    }
    while i + 1 < n - 1 && before(i + 1) <= p {
        i += 1;
    }
    (i, i + 1 + (p - before(i)))
}

fn euclid(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn distortion(original: &Array2<f64>, mapped: &Array2<f64>, seed: u64) -> DistortionReport {
    let n = original.nrows();
    let total = n * n.saturating_sub(1) / 2;
    let pairs: Vec<usize> = if total <= MAX_DISTORTION_PAIRS {
        (0..total).collect()
    } else {
        let mut rng = stage_rng(seed, Stage::PairSampling);
        index::sample(&mut rng, total, MAX_DISTORTION_PAIRS).into_vec()
    };
    let dists: Vec<(f64, f64)> = pairs
        .iter()
        .map(|&p| {
            let (i, j) = unrank_pair(p, n);
            (
                euclid(original.row(i), original.row(j)),
                euclid(mapped.row(i), mapped.row(j)),
            )
        })
        .collect();
    let zero: Vec<&(f64, f64)> = dists.iter().filter(|(o, _)| *o == 0.0).collect();
    let nonzero: Vec<&(f64, f64)> = dists.iter().filter(|(o, _)| *o > 0.0).collect();
    let sum_o: f64 = nonzero.iter().map(|(o, _)| o).sum();
    let sum_m: f64 = nonzero.iter().map(|(_, m)| m).sum();
    let scale = if sum_m > 0.0 { sum_o / sum_m } else { 1.0 };
    let ratios: Vec<f64> = nonzero.iter().map(|(o, m)| scale * m / o).collect();
    let (min_ratio, max_ratio, mean_ratio) = if ratios.is_empty() {
        (None, None, None)
    } else {
        (
            Some(ratios.iter().copied().fold(f64::INFINITY, f64::min)),
            Some(ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            Some(ratios.iter().sum::<f64>() / ratios.len() as f64),
        )
    };
    DistortionReport {
        pairs: dists.len(),
        zero_pairs: zero.len(),
        zero_pairs_preserved: zero.iter().all(|(_, m)| *m == 0.0),
        scale,
        min_ratio,
        max_ratio,
        mean_ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::uniform01;
    use ndarray::array;

    #[test]
    fn unrank_enumerates_all_pairs() {
        for n in 2..40 {
            let mut k = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    assert_eq!(unrank_pair(k, n), (i, j), "n={n} k={k}");
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn identical_rows_stay_identical() {
        let d = DataMatrix::from_array(array![[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]).unwrap();
        let (mapped, report) = gaussian_map(&d, 2, 5).unwrap();
        assert_eq!(mapped.row(0), mapped.row(1));
        assert_eq!(report.pairs, 1);
        assert_eq!(report.zero_pairs, 1);
        assert!(report.zero_pairs_preserved);
        assert_eq!(report.mean_ratio, None);
    }

    #[test]
    fn rows_are_unit_norm() {
        let mut rng = stage_rng(3, Stage::SyntheticData);
        let x = Array2::from_shape_fn((30, 8), |_| uniform01(&mut rng));
        let d = DataMatrix::from_array(x).unwrap();
        let (mapped, _) = gaussian_map(&d, 4, 3).unwrap();
        for row in mapped.outer_iter() {
            assert!((row.dot(&row) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn samples_are_capped() {
        let mut rng = stage_rng(8, Stage::SyntheticData);
        let x = Array2::from_shape_fn((200, 3), |_| uniform01(&mut rng));
        let d = DataMatrix::from_array(x).unwrap();
        let (_, report) = gaussian_map(&d, 3, 1).unwrap();
        assert_eq!(report.pairs, MAX_DISTORTION_PAIRS);
    }
}
