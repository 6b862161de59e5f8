//! Seeded randomness.
//!
//! All randomness comes from ChaCha8 seeded with [`SeedableRng::seed_from_u64`].
//! Each pipeline stage draws from its own ChaCha stream of the same key, so a
//! single top-level seed reproduces a whole run while stages stay independent:
//!
//! | stream | consumer                                   |
//! |--------|--------------------------------------------|
//! | 0      | projection axes                            |
//! | 1      | Gaussian mapping matrix                    |
//! | 2      | pair sampling for the distortion report    |
//! | 3      | synthetic data in the canned experiments   |
//!
//! Uniform variates are `(next_u64() >> 11) * 2^-53`, which lands on the
//! 2^53 evenly spaced values of `[0, 1)`. Normal variates use the
//! Box-Muller transform on two such uniforms.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Axes = 0,
    GaussianMap = 1,
    PairSampling = 2,
    SyntheticData = 3,
}

/// Generator for one stage of a seeded run.
pub fn stage_rng(seed: u64, stage: Stage) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage as u64);
    rng
}

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

#[inline]
pub fn uniform01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * TWO_POW_M53
}

/// Source of standard normal variates. Box-Muller yields two values per
/// pair of uniforms; the second is cached for the next call.
#[derive(Debug, Default)]
pub struct NormalSampler {
    spare: Option<f64>,
}

impl NormalSampler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sample<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - u lies in (0, 1], so the log is finite.
        let u1 = 1.0 - uniform01(rng);
        let u2 = uniform01(rng);
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}
