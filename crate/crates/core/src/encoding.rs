//! Linear-time re-encoding of a seriation into `[0, 1)`.
//!
//! Row masses of count-like data are close to log-normal. Taking logs,
//! standardizing, and pushing the result through the standard normal CDF
//! therefore gives values that are close to uniform on `[0, 1)`, which is
//! what digit-prefix quantization needs to produce balanced clusters. Every
//! step is elementwise or a single reduction: no sorting is involved.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numeric::{self, clamp_unit};
use crate::projection::Seriation;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformStep {
    Log,
    Standardize,
    GaussianCdf,
}

impl std::str::FromStr for TransformStep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "log" => Ok(TransformStep::Log),
            "standardize" => Ok(TransformStep::Standardize),
            "gaussian_cdf" | "erfc" => Ok(TransformStep::GaussianCdf),
            other => Err(Error::UnsupportedChain(format!("unknown step `{other}`"))),
        }
    }
}

/// The only supported chain.
pub const DEFAULT_CHAIN: [TransformStep; 3] = [
    TransformStep::Log,
    TransformStep::Standardize,
    TransformStep::GaussianCdf,
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub steps: Vec<TransformStep>,
    /// Mean of the log values.
    pub mean: f64,
    /// Sample standard deviation (divisor `n - 1`) of the log values.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSeriation {
    pub ids: Arc<[String]>,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl EncodedSeriation {
    /// Wraps values that are already in `[0, 1)` (for example a rescaled
    /// consensus projection) without transforming them.
    pub fn from_unit_values(ids: Arc<[String]>, values: Vec<f64>) -> Result<Self> {
        if ids.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: ids.len(),
                found: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(0.0..1.0).contains(*v)) {
            return Err(Error::OutOfUnitInterval(*v));
        }
        Ok(EncodedSeriation {
            ids,
            values,
            provenance: Provenance {
                steps: Vec::new(),
                mean: 0.0,
                sd: 1.0,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn log_transform(s: &Seriation) -> Result<Vec<f64>> {
    if let Some(i) = s.values.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::NonPositive {
            id: s.ids[i].clone(),
            value: s.values[i],
        });
    }
    Ok(s.values.par_iter().map(|v| v.ln()).collect())
}

/// Returns `(z, mean, sd)` with `z = (v - mean) / sd` and `sd` the sample
/// standard deviation.
pub fn standardize(v: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    if v.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "standardization needs at least two values, got {}",
            v.len()
        )));
    }
    let mean = numeric::mean(v);
    let sd = numeric::sample_sd(v, mean);
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::ZeroVariance("cannot standardize a constant vector"));
    }
    Ok((standardize_with(v, mean, sd), mean, sd))
}

fn standardize_with(v: &[f64], mean: f64, sd: f64) -> Vec<f64> {
    v.par_iter().map(|x| (x - mean) / sd).collect()
}

/// Standard normal CDF, `0.5 * erfc(-z / sqrt(2))`.
///
/// `erfc` is the musl/FreeBSD rational approximation from `libm`, accurate
/// to within one ulp.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Gaussian CDF of each value, clamped into `[0, 1)`.
pub fn uniformize(z: &[f64]) -> Vec<f64> {
    z.par_iter().map(|&x| clamp_unit(normal_cdf(x))).collect()
}

/// Log, standardize, then Gaussian CDF.
pub fn encode_pipeline(s: &Seriation) -> Result<EncodedSeriation> {
    let logs = log_transform(s)?;
    let (z, mean, sd) = standardize(&logs)?;
    drop(logs);
    Ok(EncodedSeriation {
        ids: s.ids.clone(),
        values: uniformize(&z),
        provenance: Provenance {
            steps: DEFAULT_CHAIN.to_vec(),
            mean,
            sd,
        },
    })
}

/// Runs `chain`, which must be the default log/standardize/Gaussian-CDF chain.
pub fn encode_with_chain(s: &Seriation, chain: &[TransformStep]) -> Result<EncodedSeriation> {
    if chain != DEFAULT_CHAIN {
        return Err(Error::UnsupportedChain(format!(
            "{chain:?}; only log, standardize, gaussian_cdf is implemented"
        )));
    }
    encode_pipeline(s)
}

/// Re-applies a recorded encoding to `s`. Produces output identical to the
/// run that recorded `provenance`.
pub fn replay(s: &Seriation, provenance: &Provenance) -> Result<EncodedSeriation> {
    if provenance.steps != DEFAULT_CHAIN {
        return Err(Error::UnsupportedChain(format!("{:?}", provenance.steps)));
    }
    let logs = log_transform(s)?;
    let z = standardize_with(&logs, provenance.mean, provenance.sd);
    Ok(EncodedSeriation {
        ids: s.ids.clone(),
        values: uniformize(&z),
        provenance: provenance.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `bins + 1` equally spaced edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Equal-width histogram over `range` (or the observed range). Values
/// outside an explicit range are counted in the nearest end bin, so the
/// counts always sum to the input length.
pub fn histogram_report(v: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<Histogram> {
    if v.is_empty() {
        return Err(Error::Empty);
    }
    if bins == 0 {
        return Err(Error::InvalidArgument(
            "histogram needs at least one bin".into(),
        ));
    }
    let (lo, hi) = range.unwrap_or_else(|| {
        (
            v.iter().copied().fold(f64::INFINITY, f64::min),
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    });
    if !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "invalid histogram range [{lo}, {hi}]"
        )));
    }
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|b| lo + width * b as f64).collect();
    let counts = v
        .par_chunks(numeric::CHUNK)
        .map(|chunk| {
            let mut c = vec![0usize; bins];
            for &x in chunk {
                let b = if width > 0.0 {
                    ((x - lo) / width).floor().clamp(0.0, (bins - 1) as f64) as usize
                } else {
                    0
                };
                c[b] += 1;
            }
            c
        })
        .reduce(
            || vec![0usize; bins],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(Histogram { edges, counts })
}
