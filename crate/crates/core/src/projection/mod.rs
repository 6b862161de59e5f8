//! Uniform random projections and the consensus seriation.
//!
//! Each axis has coordinates drawn uniformly from `[0, 1)`. Projecting a
//! nonnegative cloud onto such axes gives highly correlated orderings, so
//! their per-observation mean (the consensus) is a stable one-dimensional
//! seriation that tracks the row sums closely.

mod eigen;
mod gaussian;
mod independence;

use std::sync::Arc;

use ndarray::{Array2, Axis};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use eigen::{power_iteration, EigenPair};
pub use gaussian::{gaussian_map, DistortionReport, MAX_DISTORTION_PAIRS};
pub use independence::chi2_independence;

use crate::ingest::{DataMatrix, Marginals};
use crate::numeric::{self, clamp_unit, CHUNK, ONE_BELOW};
use crate::rng::{stage_rng, uniform01, Stage};
use crate::{Error, Result};

/// `k` random axes in attribute space, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisSet {
    pub axes: Array2<f64>,
    pub seed: u64,
}

impl AxisSet {
    pub fn k(&self) -> usize {
        self.axes.nrows()
    }

    pub fn m(&self) -> usize {
        self.axes.ncols()
    }
}

/// Axes drawn one at a time from the axis stream of a seed. Yields exactly
/// the rows of [`generate_axes`] for the same seed, in order.
pub struct AxisStream {
    rng: ChaCha8Rng,
    m: usize,
}

impl AxisStream {
    pub fn new(m: usize, seed: u64) -> Self {
        AxisStream {
            rng: stage_rng(seed, Stage::Axes),
            m,
        }
    }
}

impl Iterator for AxisStream {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        Some((0..self.m).map(|_| uniform01(&mut self.rng)).collect())
    }
}

pub fn generate_axes(m: usize, k: usize, seed: u64) -> Result<AxisSet> {
    if m == 0 || k == 0 {
        return Err(Error::InvalidArgument(format!(
            "axis set needs m >= 1 and k >= 1, got m={m}, k={k}"
        )));
    }
    let flat: Vec<f64> = AxisStream::new(m, seed).take(k).flatten().collect();
    let axes = Array2::from_shape_vec((k, m), flat).expect("k*m values");
    Ok(AxisSet { axes, seed })
}

/// Projections of every observation, one row per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    pub ids: Arc<[String]>,
    pub values: Array2<f64>,
    pub source_seed: u64,
    /// `true` when every row has been rescaled into `[0, 1)`.
    pub rescaled: bool,
}

impl ProjectionSet {
    pub fn k(&self) -> usize {
        self.values.nrows()
    }

    pub fn n(&self) -> usize {
        self.values.ncols()
    }
}

/// `p[i] = sum_j d[i, j] * axis[j]`.
pub fn raw_projection(d: &DataMatrix, axis: &[f64]) -> Result<Vec<f64>> {
    if axis.len() != d.m() {
        return Err(Error::DimensionMismatch {
            expected: d.m(),
            found: axis.len(),
        });
    }
    Ok(d.values()
        .axis_chunks_iter(Axis(0), CHUNK)
        .into_par_iter()
        .flat_map_iter(|block| {
            block
                .outer_iter()
                .map(|row| row.iter().zip(axis).map(|(x, a)| x * a).sum::<f64>())
                .collect::<Vec<_>>()
        })
        .collect())
}

/// Maps values affinely onto `[0, 1)`: the minimum goes to 0 and the
/// maximum to the largest double below 1. A constant vector becomes all
/// zeros. The map is non-decreasing, so orderings are preserved.
pub fn rescale_unit(v: &mut [f64]) {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if !(range > 0.0) {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    v.par_iter_mut().for_each(|x| {
        let u = (*x - min) / range;
        *x = if u >= 1.0 { ONE_BELOW } else { u };
    });
}

fn project_with(d: &DataMatrix, a: &AxisSet, rescale: bool) -> Result<ProjectionSet> {
    if a.m() != d.m() {
        return Err(Error::DimensionMismatch {
            expected: d.m(),
            found: a.m(),
        });
    }
    let mut values = Array2::zeros((a.k(), d.n()));
    for (axis, mut out) in a.axes.outer_iter().zip(values.outer_iter_mut()) {
        let axis = axis.to_vec();
        let mut p = raw_projection(d, &axis)?;
        if rescale {
            rescale_unit(&mut p);
        }
        out.assign(&ndarray::ArrayView1::from(&p));
    }
    Ok(ProjectionSet {
        ids: d.row_ids().clone(),
        values,
        source_seed: a.seed,
        rescaled: rescale,
    })
}

/// Projects onto every axis and rescales each projection into `[0, 1)`.
pub fn project(d: &DataMatrix, a: &AxisSet) -> Result<ProjectionSet> {
    project_with(d, a, true)
}

/// Projections without rescaling.
pub fn project_raw(d: &DataMatrix, a: &AxisSet) -> Result<ProjectionSet> {
    project_with(d, a, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriationKind {
    ConsensusProjection,
    RowMass,
    RowSum,
}

/// One value per observation; the one-dimensional ordering that is
/// quantized into clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct Seriation {
    pub ids: Arc<[String]>,
    pub values: Vec<f64>,
    pub kind: SeriationKind,
}

impl Seriation {
    pub fn row_mass(d: &DataMatrix, m: &Marginals) -> Self {
        Seriation {
            ids: d.row_ids().clone(),
            values: m.row_masses.clone(),
            kind: SeriationKind::RowMass,
        }
    }

    pub fn row_sum(d: &DataMatrix, m: &Marginals) -> Self {
        Seriation {
            ids: d.row_ids().clone(),
            values: m.row_sums.clone(),
            kind: SeriationKind::RowSum,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Running per-observation sum of projections. Memory is `O(n)` however
/// many projections are pushed.
#[derive(Debug, Clone)]
pub struct StreamingConsensus {
    sum: Vec<f64>,
    count: usize,
}

impl StreamingConsensus {
    pub fn new(n: usize) -> Self {
        StreamingConsensus {
            sum: vec![0.0; n],
            count: 0,
        }
    }

    pub fn push(&mut self, projection: &[f64]) {
        assert_eq!(projection.len(), self.sum.len(), "projection length");
        self.sum
            .par_iter_mut()
            .zip(projection.par_iter())
            .for_each(|(s, p)| *s += p);
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Vec<f64> {
        let t = self.count as f64;
        self.sum.par_iter().map(|s| s / t).collect()
    }
}

/// Mean of the first `t` projections of `p`.
///
/// For rescaled projection sets the result is kept inside `[0, 1)`.
pub fn consensus(p: &ProjectionSet, t: usize) -> Result<Seriation> {
    if t == 0 || t > p.k() {
        return Err(Error::InvalidArgument(format!(
            "consensus count {t} outside 1..={}",
            p.k()
        )));
    }
    let mut acc = StreamingConsensus::new(p.n());
    for row in p.values.outer_iter().take(t) {
        acc.push(row.as_slice().expect("standard layout"));
    }
    let mut values = acc.mean();
    if p.rescaled {
        values.iter_mut().for_each(|v| *v = clamp_unit(*v));
    }
    Ok(Seriation {
        ids: p.ids.clone(),
        values,
        kind: SeriationKind::ConsensusProjection,
    })
}

/// Pearson correlation between the row sums and the mean of the first `t`
/// projections, for `t = 1..=k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationCurve {
    pub t: Vec<usize>,
    pub corr: Vec<f64>,
}

/// Correlation against a fixed reference vector, with the reference's
/// centering computed once.
pub struct Correlator {
    centered: Vec<f64>,
    norm: f64,
}

impl Correlator {
    pub fn new(reference: &[f64]) -> Result<Self> {
        if reference.len() < 2 {
            return Err(Error::InvalidArgument(
                "correlation needs at least two values".into(),
            ));
        }
        let mean = numeric::mean(reference);
        let centered: Vec<f64> = reference.iter().map(|x| x - mean).collect();
        let norm = centered.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::ZeroVariance("correlation reference is constant"));
        }
        Ok(Correlator { centered, norm })
    }

    pub fn corr(&self, other: &[f64]) -> Result<f64> {
        if other.len() != self.centered.len() {
            return Err(Error::DimensionMismatch {
                expected: self.centered.len(),
                found: other.len(),
            });
        }
        let mean = numeric::mean(other);
        let (mut cross, mut ss) = (0.0, 0.0);
        for (a, b) in self.centered.iter().zip(other) {
            let d = b - mean;
            cross += a * d;
            ss += d * d;
        }
        if !(ss > 0.0) {
            return Err(Error::ZeroVariance("correlation argument is constant"));
        }
        Ok((cross / (self.norm * ss.sqrt())).clamp(-1.0, 1.0))
    }
}

pub fn correlation_curve(rowsums: &Seriation, p: &ProjectionSet) -> Result<CorrelationCurve> {
    if rowsums.len() != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            found: rowsums.len(),
        });
    }
    let correlator = Correlator::new(&rowsums.values)?;
    let mut acc = StreamingConsensus::new(p.n());
    let mut curve = CorrelationCurve {
        t: Vec::with_capacity(p.k()),
        corr: Vec::with_capacity(p.k()),
    };
    for (t, row) in p.values.outer_iter().enumerate() {
        acc.push(row.as_slice().expect("standard layout"));
        curve.t.push(t + 1);
        curve.corr.push(correlator.corr(&acc.mean())?);
    }
    Ok(curve)
}

/// Product-moment correlation of two equal-length, non-constant vectors.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    Correlator::new(a)?.corr(b)
}
