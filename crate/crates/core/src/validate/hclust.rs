//! Classical agglomerative clustering, used as a reference for the
//! linear-time hierarchy on small inputs.

use std::fmt::Write as _;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::Serialize;

use crate::projection::pearson;
use crate::{Error, Result};

/// Size guard for the quadratic-memory reference methods.
pub const MAX_HC_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    /// Unweighted group average (UPGMA).
    Average,
    /// Minimum inter-cluster distance.
    Single,
}

impl std::str::FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(Linkage::Average),
            "single" => Ok(Linkage::Single),
            other => Err(Error::InvalidArgument(format!("unknown linkage `{other}`"))),
        }
    }
}

/// One agglomeration step. Nodes `0..p` are leaves; merge `t` creates node
/// `p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub ids: Arc<[String]>,
    pub merges: Vec<Merge>,
    pub linkage: Linkage,
}

impl Dendrogram {
    pub fn leaves(&self) -> usize {
        self.ids.len()
    }

    /// Nested text form: a leaf is its id, an internal node is
    /// `(<left>,<right>):<height>`, and the whole tree ends with `;`.
    pub fn to_nested_text(&self) -> String {
        let p = self.leaves();
        let mut out = String::new();
        if p == 0 {
            return ";".into();
        }
        let root = if self.merges.is_empty() {
            0
        } else {
            p + self.merges.len() - 1
        };
        // Explicit stack: deep single-link chains would overflow recursion.
        enum Step {
            Enter(usize),
            Comma,
            Close(f64),
        }
        let mut stack = vec![Step::Enter(root)];
        while let Some(step) = stack.pop() {
            match step {
                Step::Enter(node) if node < p => out.push_str(&self.ids[node]),
                Step::Enter(node) => {
                    let m = self.merges[node - p];
                    out.push('(');
                    stack.push(Step::Close(m.height));
                    stack.push(Step::Enter(m.right));
                    stack.push(Step::Comma);
                    stack.push(Step::Enter(m.left));
                }
                Step::Comma => out.push(','),
                Step::Close(h) => {
                    let _ = write!(out, "):{h}");
                }
            }
        }
        out.push(';');
        out
    }
}

/// Pairwise Euclidean distances between the rows of `x`.
pub fn euclidean_distance_matrix(x: &Array2<f64>) -> Result<Array2<f64>> {
    let p = x.nrows();
    if p < 2 {
        return Err(Error::InvalidArgument(format!(
            "distance matrix needs at least two rows, got {p}"
        )));
    }
    if p > MAX_HC_POINTS {
        return Err(Error::TooLarge {
            what: "distance matrix",
            size: p,
            limit: MAX_HC_POINTS,
        });
    }
    let mut out = Array2::zeros((p, p));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            for j in 0..p {
                // Same operand order for (i, j) and (j, i) keeps the matrix exactly symmetric.
                let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                let (u, v) = (x.row(lo), x.row(hi));
                row[j] = if i == j {
                    0.0
                } else {
                    u.iter()
                        .zip(v)
                        .map(|(s, t)| (s - t) * (s - t))
                        .sum::<f64>()
                        .sqrt()
                };
            }
        });
    Ok(out)
}

/// Distances `|x_i - x_j|` between scalar values.
pub fn line_distance_matrix(values: &[f64]) -> Result<Array2<f64>> {
    let col = Array2::from_shape_vec((values.len(), 1), values.to_vec())
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    euclidean_distance_matrix(&col)
}

fn check_distance_matrix(dist: &Array2<f64>) -> Result<usize> {
    let (p, q) = dist.dim();
    if p != q {
        return Err(Error::InvalidArgument(format!(
            "distance matrix must be square, got {p}x{q}"
        )));
    }
    if p > MAX_HC_POINTS {
        return Err(Error::TooLarge {
            what: "agglomerative clustering input",
            size: p,
            limit: MAX_HC_POINTS,
        });
    }
    for i in 0..p {
        for j in i..p {
            let (a, b) = (dist[[i, j]], dist[[j, i]]);
            if !a.is_finite() || a < 0.0 || a != b {
                return Err(Error::InvalidArgument(format!(
                    "distance matrix entry ({i}, {j}) is not a finite symmetric nonnegative value"
                )));
            }
        }
    }
    Ok(p)
}

/// Lance-Williams update for the distance from `k` to the union of `a` and
/// `b`. The average is formed as `lo + (hi - lo) * w` so it never drops
/// below `min(d_ak, d_bk)`, keeping merge heights monotone in floating point.
fn updated(linkage: Linkage, d_a: f64, d_b: f64, n_a: usize, n_b: usize) -> f64 {
    match linkage {
        Linkage::Single => d_a.min(d_b),
        Linkage::Average => {
            let (lo, hi, n_hi) = if d_a <= d_b {
                (d_a, d_b, n_b)
            } else {
                (d_b, d_a, n_a)
            };
            lo + (hi - lo) * (n_hi as f64 / (n_a + n_b) as f64)
        }
    }
}

/// Agglomerative clustering on a full distance matrix.
///
/// At each step the closest pair of active clusters is merged; among equal
/// distances the pair with the lexicographically smallest
/// `(min index, max index)` wins, where a merged cluster keeps the smaller
/// slot index of its two parts. Each slot caches its nearest neighbour among
/// higher slots, so a step costs `O(p)` plus `O(p)` per invalidated cache.
pub fn agglomerative_hc(
    ids: Arc<[String]>,
    dist: &Array2<f64>,
    linkage: Linkage,
) -> Result<Dendrogram> {
    let p = check_distance_matrix(dist)?;
    if ids.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: ids.len(),
        });
    }
    let mut d = dist.clone();
    let mut active = vec![true; p];
    let mut size = vec![1usize; p];
    let mut node: Vec<usize> = (0..p).collect();
    let mut nn = vec![usize::MAX; p];
    let mut nn_dist = vec![f64::INFINITY; p];

    let recompute =
        |k: usize, d: &Array2<f64>, active: &[bool], nn: &mut [usize], nn_dist: &mut [f64]| {
            let mut best = (f64::INFINITY, usize::MAX);
            for j in (k + 1)..p {
                if active[j] && d[[k, j]] < best.0 {
                    best = (d[[k, j]], j);
                }
            }
            nn_dist[k] = best.0;
            nn[k] = best.1;
        };
    for k in 0..p {
        recompute(k, &d, &active, &mut nn, &mut nn_dist);
    }

    let mut merges = Vec::with_capacity(p.saturating_sub(1));
    for t in 0..p.saturating_sub(1) {
        let mut a = usize::MAX;
        let mut best = f64::INFINITY;
        for i in 0..p {
            if active[i] && nn[i] != usize::MAX && (a == usize::MAX || nn_dist[i] < best) {
                a = i;
                best = nn_dist[i];
            }
        }
        let b = nn[a];
        let height = d[[a, b]];
        merges.push(Merge {
            left: node[a].min(node[b]),
            right: node[a].max(node[b]),
            height,
            size: size[a] + size[b],
        });

        for k in 0..p {
            if active[k] && k != a && k != b {
                let v = updated(linkage, d[[a, k]], d[[b, k]], size[a], size[b]);
                d[[a, k]] = v;
                d[[k, a]] = v;
            }
        }
        active[b] = false;
        size[a] += size[b];
        node[a] = p + t;

        for k in 0..p {
            if !active[k] || k == a {
                continue;
            }
            if nn[k] == a || nn[k] == b {
                recompute(k, &d, &active, &mut nn, &mut nn_dist);
            } else if k < a && (d[[k, a]] < nn_dist[k] || (d[[k, a]] == nn_dist[k] && a < nn[k])) {
                nn[k] = a;
                nn_dist[k] = d[[k, a]];
            }
        }
        recompute(a, &d, &active, &mut nn, &mut nn_dist);
    }
    Ok(Dendrogram {
        ids,
        merges,
        linkage,
    })
}

/// Matrix of merge heights at which each pair of leaves first joins.
pub fn cophenetic_matrix(t: &Dendrogram) -> Array2<f64> {
    let p = t.leaves();
    let mut out = Array2::zeros((p, p));
    let mut members: Vec<Vec<usize>> = (0..p).map(|i| vec![i]).collect();
    for m in &t.merges {
        let left = std::mem::take(&mut members[m.left]);
        let right = std::mem::take(&mut members[m.right]);
        for &a in &left {
            for &b in &right {
                out[[a, b]] = m.height;
                out[[b, a]] = m.height;
            }
        }
        let mut joined = left;
        joined.extend(right);
        members.push(joined);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CopheneticResult {
    pub coefficient: f64,
    pub n: usize,
}

/// Pearson correlation of the two trees' cophenetic distances over all
/// unordered leaf pairs. Leaves are matched by id.
pub fn cophenetic_correlation(t1: &Dendrogram, t2: &Dendrogram) -> Result<CopheneticResult> {
    let p = t1.leaves();
    if t2.leaves() != p {
        return Err(Error::LeafMismatch);
    }
    let index: std::collections::HashMap<&str, usize> = t2
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let perm: Vec<usize> = t1
        .ids
        .iter()
        .map(|id| index.get(id.as_str()).copied().ok_or(Error::LeafMismatch))
        .collect::<Result<_>>()?;
    let c1 = cophenetic_matrix(t1);
    let c2 = cophenetic_matrix(t2);
    let pairs = p * p.saturating_sub(1) / 2;
    let mut a = Vec::with_capacity(pairs);
    let mut b = Vec::with_capacity(pairs);
    for i in 0..p {
        for j in (i + 1)..p {
            a.push(c1[[i, j]]);
            b.push(c2[[perm[i], perm[j]]]);
        }
    }
    Ok(CopheneticResult {
        coefficient: pearson(&a, &b)?,
        n: p,
    })
}
