//! Cluster quality measures and the quadratic reference hierarchy used to
//! cross-check the linear-time results.

mod experiments;
mod hclust;

use std::collections::BTreeMap;

use serde::Serialize;

pub use experiments::{
    iris_matrix, run_iris_experiment, run_uniform_experiment, ExperimentOptions, IrisReport,
    UniformReport, IRIS_TSV,
};
pub use hclust::{
    agglomerative_hc, cophenetic_correlation, cophenetic_matrix, euclidean_distance_matrix,
    line_distance_matrix, CopheneticResult, Dendrogram, Linkage, Merge, MAX_HC_POINTS,
};

use crate::ingest::DataMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub label: u64,
    pub cardinality: usize,
    pub mean_vector: Vec<f64>,
    /// Sum over attributes of the within-cluster sample variance.
    pub dispersion: f64,
    /// `3 * sqrt(dispersion)`.
    pub three_sigma: f64,
    pub nn_label: Option<u64>,
    pub nn_distance: Option<f64>,
}

/// Mean vector, dispersion and nearest neighbour cluster for every
/// non-empty label, ordered by label.
///
/// Variances use divisor `cardinality - 1`; singletons get dispersion 0.
/// Nearest neighbours are by Euclidean distance between mean vectors, ties
/// going to the lower label.
pub fn cluster_summaries(d: &DataMatrix, labels: &[u64]) -> Result<Vec<ClusterSummary>> {
    if labels.len() != d.n() {
        return Err(Error::DimensionMismatch {
            expected: d.n(),
            found: labels.len(),
        });
    }
    let m = d.m();
    let mut slot: BTreeMap<u64, usize> = BTreeMap::new();
    for &l in labels {
        let next = slot.len();
        slot.entry(l).or_insert(next);
    }
    let c = slot.len();
    let mut counts = vec![0usize; c];
    let mut sums = vec![0.0; c * m];
    let slots: Vec<usize> = labels.iter().map(|l| slot[l]).collect();
    for (row, &s) in d.values().outer_iter().zip(&slots) {
        counts[s] += 1;
        for (acc, x) in sums[s * m..(s + 1) * m].iter_mut().zip(row) {
            *acc += x;
        }
    }
    let means: Vec<f64> = sums
        .chunks(m)
        .zip(&counts)
        .flat_map(|(sum, &n)| sum.iter().map(move |v| v / n as f64))
        .collect();
    let mut ss = vec![0.0; c * m];
    for (row, &s) in d.values().outer_iter().zip(&slots) {
        let mu = &means[s * m..(s + 1) * m];
        for ((acc, x), mu) in ss[s * m..(s + 1) * m].iter_mut().zip(row).zip(mu) {
            *acc += (x - mu) * (x - mu);
        }
    }

    let mut out: Vec<ClusterSummary> = slot
        .iter()
        .map(|(&label, &s)| {
            let n = counts[s];
            let dispersion = if n > 1 {
                ss[s * m..(s + 1) * m].iter().sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            ClusterSummary {
                label,
                cardinality: n,
                mean_vector: means[s * m..(s + 1) * m].to_vec(),
                dispersion,
                three_sigma: 3.0 * dispersion.sqrt(),
                nn_label: None,
                nn_distance: None,
            }
        })
        .collect();

    for i in 0..out.len() {
        let mut best: Option<(f64, u64)> = None;
        for j in 0..out.len() {
            if i == j {
                continue;
            }
            let dist = euclidean(&out[i].mean_vector, &out[j].mean_vector);
            if best.is_none_or(|(bd, _)| dist < bd) {
                best = Some((dist, out[j].label));
            }
        }
        if let Some((dist, label)) = best {
            out[i].nn_label = Some(label);
            out[i].nn_distance = Some(dist);
        }
    }
    Ok(out)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationEntry {
    pub label: u64,
    /// `three_sigma / nn_distance`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationReport {
    pub entries: Vec<SeparationEntry>,
    /// Every cluster is more compact than the distance to its nearest
    /// neighbour cluster.
    pub well_separated: bool,
}

pub fn separation_report(summaries: &[ClusterSummary]) -> Result<SeparationReport> {
    if summaries.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "separation needs at least two clusters, got {}",
            summaries.len()
        )));
    }
    let entries: Vec<SeparationEntry> = summaries
        .iter()
        .map(|s| {
            let nn = s.nn_distance.unwrap_or(f64::INFINITY);
            let ratio = if s.three_sigma == 0.0 {
                0.0
            } else {
                s.three_sigma / nn
            };
            SeparationEntry {
                label: s.label,
                ratio,
            }
        })
        .collect();
    let well_separated = entries.iter().all(|e| e.ratio < 1.0);
    Ok(SeparationReport {
        entries,
        well_separated,
    })
}
