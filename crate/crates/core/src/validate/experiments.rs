//! Canned cophenetic comparisons on the iris table and on uniform random data.
//!
//! Each experiment builds average-linkage hierarchies on (i) the full data,
//! (ii) the row sums and (iii) the consensus of uniform random projections,
//! and correlates their cophenetic distances.

use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use super::hclust::{
    agglomerative_hc, cophenetic_correlation, euclidean_distance_matrix, line_distance_matrix,
    Dendrogram, Linkage,
};
use crate::ingest::{read_matrix, row_sums, DataMatrix, Format, LoadOptions};
use crate::projection::{consensus, generate_axes, pearson, project, project_raw};
use crate::rng::{stage_rng, uniform01, Stage};
use crate::Result;

/// Fisher's iris measurements (150 flowers by sepal length, sepal width,
/// petal length, petal width), with the corrected values for flowers 35
/// and 38.
pub const IRIS_TSV: &str = include_str!("../../data/iris.tsv");

pub fn iris_matrix() -> DataMatrix {
    read_matrix(
        IRIS_TSV.as_bytes(),
        LoadOptions {
            format: Format::Tsv,
            has_header: true,
            id_column: true,
            nonneg: true,
        },
        Path::new("<iris fixture>"),
    )
    .expect("bundled iris table parses")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperimentOptions {
    pub projections: usize,
    pub linkage: Linkage,
    /// Cluster only the first `subsample` rows of the uniform data in the
    /// quadratic reference hierarchies.
    pub subsample: Option<usize>,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            projections: 100,
            linkage: Linkage::Average,
            subsample: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusComparison {
    /// Pearson correlation of the row sums with the consensus projection.
    pub corr_row_sums_mean_rp: f64,
    pub data_vs_mean_rp: f64,
    pub row_sums_vs_mean_rp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrisReport {
    pub seed: u64,
    pub n: usize,
    pub options: ExperimentOptions,
    pub data_vs_row_sums: f64,
    /// Consensus of rescaled projections (the pipeline default).
    pub rescaled: ConsensusComparison,
    /// Consensus of raw, unrescaled projections.
    pub raw: ConsensusComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformReport {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub clustered: usize,
    pub options: ExperimentOptions,
    pub data_vs_row_sums: f64,
    pub rescaled: ConsensusComparison,
    pub raw: ConsensusComparison,
}

fn tree_on_rows(d: &DataMatrix, linkage: Linkage) -> Result<Dendrogram> {
    let dist = euclidean_distance_matrix(d.values())?;
    agglomerative_hc(d.row_ids().clone(), &dist, linkage)
}

fn tree_on_values(d: &DataMatrix, values: &[f64], linkage: Linkage) -> Result<Dendrogram> {
    let dist = line_distance_matrix(values)?;
    agglomerative_hc(d.row_ids().clone(), &dist, linkage)
}

fn compare(
    d: &DataMatrix,
    rs: &[f64],
    data_tree: &Dendrogram,
    rs_tree: &Dendrogram,
    mean_rp: &[f64],
    linkage: Linkage,
) -> Result<ConsensusComparison> {
    let rp_tree = tree_on_values(d, mean_rp, linkage)?;
    Ok(ConsensusComparison {
        corr_row_sums_mean_rp: pearson(rs, mean_rp)?,
        data_vs_mean_rp: cophenetic_correlation(data_tree, &rp_tree)?.coefficient,
        row_sums_vs_mean_rp: cophenetic_correlation(rs_tree, &rp_tree)?.coefficient,
    })
}

struct Comparisons {
    data_vs_row_sums: f64,
    rescaled: ConsensusComparison,
    raw: ConsensusComparison,
}

/// Projections are computed on `full`; the hierarchies use its first
/// `clustered` rows.
fn run_comparisons(
    full: &DataMatrix,
    clustered: &DataMatrix,
    seed: u64,
    opts: &ExperimentOptions,
) -> Result<Comparisons> {
    let axes = generate_axes(full.m(), opts.projections, seed)?;
    let p = clustered.n();
    let mean_rescaled = consensus(&project(full, &axes)?, opts.projections)?.values;
    let mean_raw = consensus(&project_raw(full, &axes)?, opts.projections)?.values;
    let rs = row_sums(clustered);

    let data_tree = tree_on_rows(clustered, opts.linkage)?;
    let rs_tree = tree_on_values(clustered, &rs, opts.linkage)?;
    Ok(Comparisons {
        data_vs_row_sums: cophenetic_correlation(&data_tree, &rs_tree)?.coefficient,
        rescaled: compare(
            clustered,
            &rs,
            &data_tree,
            &rs_tree,
            &mean_rescaled[..p],
            opts.linkage,
        )?,
        raw: compare(
            clustered,
            &rs,
            &data_tree,
            &rs_tree,
            &mean_raw[..p],
            opts.linkage,
        )?,
    })
}

pub fn run_iris_experiment(seed: u64, opts: &ExperimentOptions) -> Result<IrisReport> {
    let d = iris_matrix();
    let c = run_comparisons(&d, &d, seed, opts)?;
    Ok(IrisReport {
        seed,
        n: d.n(),
        options: *opts,
        data_vs_row_sums: c.data_vs_row_sums,
        rescaled: c.rescaled,
        raw: c.raw,
    })
}

pub const UNIFORM_ROWS: usize = 2500;
pub const UNIFORM_COLS: usize = 12;

/// Uniform `[0, 1)` data of the experiment's shape, from the synthetic-data
/// stream of `seed`.
pub fn uniform_matrix(seed: u64) -> DataMatrix {
    let mut rng = stage_rng(seed, Stage::SyntheticData);
    let x = Array2::from_shape_fn((UNIFORM_ROWS, UNIFORM_COLS), |_| uniform01(&mut rng));
    DataMatrix::from_array(x).expect("finite uniform data")
}

pub fn run_uniform_experiment(seed: u64, opts: &ExperimentOptions) -> Result<UniformReport> {
    let full = uniform_matrix(seed);
    let p = opts.subsample.unwrap_or(full.n()).clamp(2, full.n());
    let clustered = if p == full.n() {
        full.clone()
    } else {
        DataMatrix::new(
            full.row_ids()[..p].to_vec(),
            full.col_names().to_vec(),
            full.values().slice(ndarray::s![..p, ..]).to_owned(),
        )?
    };
    let c = run_comparisons(&full, &clustered, seed, opts)?;
    let rs = row_sums(&full);
    let axes = generate_axes(full.m(), opts.projections, seed)?;
    let full_mean = consensus(&project(&full, &axes)?, opts.projections)?.values;
    let mut rescaled = c.rescaled;
    rescaled.corr_row_sums_mean_rp = pearson(&rs, &full_mean)?;
    Ok(UniformReport {
        seed,
        n: full.n(),
        m: full.m(),
        clustered: p,
        options: *opts,
        data_vs_row_sums: c.data_vs_row_sums,
        rescaled,
        raw: c.raw,
    })
}
