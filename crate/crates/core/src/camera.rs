//! Camera expert distributions from map-matched states.
//!
//! A map match yields an extracted position at the match time. It is carried
//! forward to the GNSS epoch with IMU odometry, scored against every particle
//! by negated, temperature-scaled Euclidean distance, and turned into a
//! per-particle probability vector with a SoftMax.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::estimator::{OdometrySample, ParticleSet};

/// Default SoftMax temperature, meters.
pub const DEFAULT_TAU: f64 = 5.0;

/// Output of the (emulated) map matcher for one image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapMatchResult {
    pub extracted_state: Vector3<f64>,
    pub match_time: f64,
    /// Diagnostic match confidence in `[0, 1]`; not used for weighting.
    pub quality: f64,
}

/// Probability vector over the particles of one epoch, index-aligned with the
/// particle set it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertDistribution {
    pub probs: Vec<f64>,
}

impl ExpertDistribution {
    /// Wraps a probability vector after checking it is nonnegative and sums
    /// to one within `1e-9`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidInput("expert distribution must not be empty".into()));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidInput("probabilities must be finite and nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("probabilities sum to {total}, expected 1")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(s: usize) -> Self {
        Self { probs: vec![1.0 / s as f64; s] }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Constant-acceleration carry-forward: `x + v·dt + ½·a·dt²`.
pub fn interpolate_state(x_prev: &Vector3<f64>, odo: &OdometrySample) -> Result<Vector3<f64>> {
    if !(odo.dt >= 0.0) {
        return Err(Error::InvalidInput(format!("odometry dt must be >= 0, got {}", odo.dt)));
    }
    Ok(x_prev + odo.displacement())
}

/// `ω_c = −‖state − x_c‖ / τ` for each particle.
pub fn distance_scores(state: &Vector3<f64>, ps: &ParticleSet, tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidInput(format!("temperature must be positive, got {tau}")));
    }
    Ok(ps.particles.iter().map(|p| -(state - p.position).norm() / tau).collect())
}

/// Max-subtracted SoftMax.
pub fn softmax_distribution(scores: &[f64]) -> Result<ExpertDistribution> {
    if scores.is_empty() {
        return Err(Error::InvalidInput("no scores".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("scores must be finite".into()));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(ExpertDistribution { probs: exps.into_iter().map(|e| e / total).collect() })
}

/// Full camera expert: interpolate, score, SoftMax.
pub fn camera_expert(
    mm: &MapMatchResult,
    odo_to_epoch: &OdometrySample,
    ps: &ParticleSet,
    tau: f64,
) -> Result<ExpertDistribution> {
    let state = interpolate_state(&mm.extracted_state, odo_to_epoch)?;
    softmax_distribution(&distance_scores(&state, ps, tau)?)
}
