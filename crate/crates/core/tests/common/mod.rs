#![allow(dead_code)]

use baireclust::ingest::DataMatrix;
use baireclust::rng::{uniform01, NormalSampler};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| uniform01(&mut r)).collect()
}

pub fn normal_vec(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng(seed);
    let mut s = NormalSampler::new();
    (0..n).map(|_| s.sample(&mut r)).collect()
}

/// Exponential(1) by inversion.
pub fn exponential_vec(seed: u64, n: usize) -> Vec<f64> {
    uniform_vec(seed, n)
        .into_iter()
        .map(|u| -(1.0 - u).ln())
        .collect()
}

pub fn lognormal_vec(seed: u64, n: usize, mu: f64, sigma: f64) -> Vec<f64> {
    normal_vec(seed, n)
        .into_iter()
        .map(|z| (mu + sigma * z).exp())
        .collect()
}

pub fn uniform_matrix(seed: u64, n: usize, m: usize) -> DataMatrix {
    let mut r = rng(seed);
    DataMatrix::from_array(Array2::from_shape_fn((n, m), |_| uniform01(&mut r))).unwrap()
}

/// Heavy-tailed count-like data: each row scaled by a log-normal factor.
pub fn gene_like_matrix(seed: u64, n: usize, m: usize) -> DataMatrix {
    let mut r = rng(seed);
    let mut z = NormalSampler::new();
    let mut x = Array2::zeros((n, m));
    for mut row in x.rows_mut() {
        let scale = (2.0 * z.sample(&mut r)).exp();
        for v in row.iter_mut() {
            *v = scale * (-(1.0 - uniform01(&mut r)).ln() + 0.05);
        }
    }
    DataMatrix::from_array(x).unwrap()
}

/// Kolmogorov-Smirnov distance of a sample from the uniform distribution.
pub fn ks_uniform(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let lo = x - i as f64 / n;
            let hi = (i + 1) as f64 / n - x;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and eigenvectors (as columns).
pub fn jacobi_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[[i, i]]).collect(), v)
}

/// Seeded symmetric matrix with entries uniform on `[0, 1)`.
pub fn random_symmetric_nonneg(seed: u64, n: usize) -> Array2<f64> {
    let mut r = rng(seed);
    let mut s = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let x = uniform01(&mut r);
            s[[i, j]] = x;
            s[[j, i]] = x;
        }
    }
    s
}
