//! The Baire (longest common prefix) ultrametric and the regular `B`-way
//! hierarchy it induces on values in `[0, 1)`.
//!
//! Digits come from one exact 128-bit integer computation per value at the
//! finest significant precision, so labels at successive levels nest with
//! no rounding exceptions and do not depend on the requested depth.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::encoding::EncodedSeriation;
use crate::numeric::CHUNK;
use crate::{Error, Result};

/// Quadratic guard for [`distance_matrix_baire`].
pub const MAX_DISTANCE_SUBSET: usize = 10_000;

/// Deepest level whose labels are all significant for base `B`: the largest
/// `L` with `B^L <= 2^52`.
pub fn max_depth(base: u32) -> usize {
    assert!(base >= 2, "base must be at least 2");
    let limit = 1u64 << 52;
    let mut depth = 0;
    let mut p = 1u64;
    while let Some(next) = p.checked_mul(base as u64) {
        if next > limit {
            break;
        }
        p = next;
        depth += 1;
    }
    depth
}

fn check_base(base: u32) -> Result<()> {
    if base < 2 {
        return Err(Error::InvalidArgument(format!(
            "base must be >= 2, got {base}"
        )));
    }
    Ok(())
}

fn check_depth(base: u32, depth: usize) -> Result<()> {
    check_base(base)?;
    let max = max_depth(base);
    if depth == 0 || depth > max {
        return Err(Error::DepthTooLarge { depth, max, base });
    }
    Ok(())
}

fn check_unit(v: f64) -> Result<()> {
    if (0.0..1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::OutOfUnitInterval(v))
    }
}

/// Index of `v` on the grid of spacing `B^-P`, `P = max_depth(B)`: the
/// exact value of `floor((v + 2^-54) * B^P)`.
///
/// `2^-54` bounds the representation error of any double below 1, so the
/// double nearest to a `P`-digit fraction such as `0.15` indexes that
/// fraction rather than its predecessor. Every level's label is a prefix of
/// this one index, which makes the levels nest exactly.
fn grid_index(v: f64, scale: u64) -> u64 {
    debug_assert!((0.0..1.0).contains(&v));
    let bits = v.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as u32;
    let frac = bits & ((1u64 << 52) - 1);
    // v = mant * 2^-shift, shift >= 53 below 1
    let (mant, shift) = if exp == 0 {
        (frac, 1074u32)
    } else {
        (frac | (1u64 << 52), 1075 - exp)
    };
    if shift >= 110 {
        // (v + 2^-54) * 2^52 < 2^-5 + 2^-2
        return 0;
    }
    let s = shift.max(54);
    let num = ((mant as u128 * scale as u128) << (s - shift)) + ((scale as u128) << (s - 54));
    (num >> s) as u64
}

fn grid_scale(base: u32) -> (u64, usize) {
    let p = max_depth(base);
    ((base as u64).pow(p as u32), p)
}

/// Label of `v` at `level` given its grid index.
fn label_at(index: u64, base: u32, precision: usize, level: usize) -> u64 {
    index / (base as u64).pow((precision - level) as u32)
}

/// The base-`B` integer formed by the first `level` digits of `v`, which
/// is `floor(v * B^level)` except within `2^-54` below a digit boundary.
pub fn prefix_label(v: f64, base: u32, level: usize) -> Result<u64> {
    check_unit(v)?;
    if level == 0 {
        check_base(base)?;
        return Ok(0);
    }
    check_depth(base, level)?;
    let (scale, p) = grid_scale(base);
    Ok(label_at(grid_index(v, scale), base, p, level))
}

/// The first `count` base-`B` digits of `v`. They reconstruct `v` to
/// within `B^-count`, up to the `2^-54` allowance of the labels.
pub fn digits(v: f64, base: u32, count: usize) -> Result<Vec<u32>> {
    let mut label = prefix_label(v, base, count)?;
    let b = base as u64;
    let mut out = vec![0u32; count];
    for d in out.iter_mut().rev() {
        *d = (label % b) as u32;
        label /= b;
    }
    Ok(out)
}

/// Length of the longest common base-`B` digit prefix of `u` and `v`,
/// capped at `precision`.
pub fn common_prefix_len(u: f64, v: f64, base: u32, precision: usize) -> Result<usize> {
    let mut a = prefix_label(u, base, precision)?;
    let mut b = prefix_label(v, base, precision)?;
    let mut s = precision;
    while a != b {
        a /= base as u64;
        b /= base as u64;
        s -= 1;
    }
    Ok(s)
}

/// Baire distance `B^-s`, where `s` is the common prefix length, and 0 when
/// all `precision` digits agree.
pub fn baire_distance(u: f64, v: f64, base: u32, precision: usize) -> Result<f64> {
    let s = common_prefix_len(u, v, base, precision)?;
    Ok(distance_for_prefix(base, s, precision))
}

fn distance_for_prefix(base: u32, s: usize, precision: usize) -> f64 {
    if s >= precision {
        0.0
    } else {
        1.0 / (base as u64).pow(s as u32) as f64
    }
}

/// Nested partitions read off the digit prefixes: level `l` has at most
/// `B^l` clusters and refines level `l - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaireHierarchy {
    base: u32,
    depth: usize,
    /// `labels[l - 1][i]` is the level-`l` label of observation `i`.
    labels: Vec<Vec<u64>>,
    ids: Arc<[String]>,
}

impl BaireHierarchy {
    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn ids(&self) -> &Arc<[String]> {
        &self.ids
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    /// Labels at `level` (1-based).
    ///
    /// # Panics
    /// If `level` is 0 or deeper than the hierarchy.
    pub fn level(&self, level: usize) -> &[u64] {
        assert!(
            (1..=self.depth).contains(&level),
            "level {level} outside 1..={}",
            self.depth
        );
        &self.labels[level - 1]
    }
}

/// Computes every level's labels in one pass over the values.
pub fn build_hierarchy(e: &EncodedSeriation, base: u32, depth: usize) -> Result<BaireHierarchy> {
    check_depth(base, depth)?;
    if let Some(v) = e.values.iter().find(|v| !(0.0..1.0).contains(*v)) {
        return Err(Error::OutOfUnitInterval(*v));
    }
    let b = base as u64;
    let (scale, p) = grid_scale(base);
    let n = e.values.len();
    let mut labels = vec![vec![0u64; n]; depth];
    // One chunk of deepest labels at a time, fanned out to all levels.
    let chunks: Vec<Vec<u64>> = e
        .values
        .par_chunks(CHUNK)
        .map(|c| {
            c.iter()
                .map(|&v| label_at(grid_index(v, scale), base, p, depth))
                .collect()
        })
        .collect();
    for (level, out) in labels.iter_mut().enumerate().rev() {
        let divisor = b.pow((depth - 1 - level) as u32);
        out.par_chunks_mut(CHUNK)
            .zip(chunks.par_iter())
            .for_each(|(dst, src)| {
                for (d, s) in dst.iter_mut().zip(src) {
                    *d = s / divisor;
                }
            });
    }
    Ok(BaireHierarchy {
        base,
        depth,
        labels,
        ids: e.ids.clone(),
    })
}

fn prefix_target(h: &BaireHierarchy, prefix: &[u32]) -> Result<u64> {
    if prefix.len() > h.depth {
        return Err(Error::InvalidArgument(format!(
            "prefix of length {} is deeper than the hierarchy ({})",
            prefix.len(),
            h.depth
        )));
    }
    let mut target = 0u64;
    for &d in prefix {
        if d >= h.base {
            return Err(Error::InvalidDigit {
                digit: d,
                base: h.base,
            });
        }
        target = target * h.base as u64 + d as u64;
    }
    Ok(target)
}

/// Indices of the observations whose digits start with `prefix`, in input
/// order. One linear scan.
pub fn cluster_indices(h: &BaireHierarchy, prefix: &[u32]) -> Result<Vec<usize>> {
    let target = prefix_target(h, prefix)?;
    if prefix.is_empty() {
        return Ok((0..h.n()).collect());
    }
    Ok(h.level(prefix.len())
        .iter()
        .enumerate()
        .filter_map(|(i, &l)| (l == target).then_some(i))
        .collect())
}

/// Identifiers of the observations whose digits start with `prefix`.
pub fn cluster_members<'a>(h: &'a BaireHierarchy, prefix: &[u32]) -> Result<Vec<&'a str>> {
    Ok(cluster_indices(h, prefix)?
        .into_iter()
        .map(|i| h.ids[i].as_str())
        .collect())
}

/// Parses a comma separated digit prefix such as `3,7`. The empty string is
/// the root.
pub fn parse_prefix(s: &str) -> Result<Vec<u32>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| Error::InvalidArgument(format!("invalid prefix digit `{t}`")))
        })
        .collect()
}

/// Cardinalities of the non-empty clusters at one level. Labels are
/// absolute, so empty clusters leave gaps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionTable {
    pub level: usize,
    pub cardinalities: BTreeMap<u64, usize>,
    pub nonempty_count: usize,
}

/// Levels with at most this many possible labels are counted in a dense
/// array; deeper ones in a hash map.
const DENSE_LABELS: u64 = 1 << 20;

pub fn partition_table(h: &BaireHierarchy, level: usize) -> Result<PartitionTable> {
    if level == 0 || level > h.depth {
        return Err(Error::InvalidArgument(format!(
            "level {level} outside 1..={}",
            h.depth
        )));
    }
    let labels = h.level(level);
    let width = (h.base as u64).pow(level as u32);
    let cardinalities: BTreeMap<u64, usize> = if width <= DENSE_LABELS {
        let counts = labels
            .par_chunks(CHUNK)
            .map(|c| {
                let mut acc = vec![0usize; width as usize];
                for &l in c {
                    acc[l as usize] += 1;
                }
                acc
            })
            .reduce(
                || vec![0usize; width as usize],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        counts
            .into_iter()
            .enumerate()
            .filter(|(_, c)| *c > 0)
            .map(|(l, c)| (l as u64, c))
            .collect()
    } else {
        let mut counts: HashMap<u64, usize> = HashMap::new();
        for &l in labels {
            *counts.entry(l).or_default() += 1;
        }
        counts.into_iter().collect()
    };
    Ok(PartitionTable {
        level,
        nonempty_count: cardinalities.len(),
        cardinalities,
    })
}

/// Pairwise Baire distances between the named observations.
pub fn distance_matrix_baire<S: AsRef<str>>(
    e: &EncodedSeriation,
    subset: &[S],
    base: u32,
    precision: usize,
) -> Result<Array2<f64>> {
    if subset.len() > MAX_DISTANCE_SUBSET {
        return Err(Error::TooLarge {
            what: "Baire distance subset",
            size: subset.len(),
            limit: MAX_DISTANCE_SUBSET,
        });
    }
    check_depth(base, precision)?;
    let index: HashMap<&str, usize> = e
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let labels: Vec<u64> = subset
        .iter()
        .map(|id| {
            let i = *index
                .get(id.as_ref())
                .ok_or_else(|| Error::InvalidArgument(format!("unknown id `{}`", id.as_ref())))?;
            prefix_label(e.values[i], base, precision)
        })
        .collect::<Result<_>>()?;
    let p = labels.len();
    let b = base as u64;
    let mut out = Array2::zeros((p, p));
    for i in 0..p {
        for j in (i + 1)..p {
            let (mut a, mut c, mut s) = (labels[i], labels[j], precision);
            while a != c {
                a /= b;
                c /= b;
                s -= 1;
            }
            let d = distance_for_prefix(base, s, precision);
            out[[i, j]] = d;
            out[[j, i]] = d;
        }
    }
    Ok(out)
}
