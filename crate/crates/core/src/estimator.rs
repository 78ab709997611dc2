//! Particle representation and the filter primitives shared by every module:
//! odometry propagation, log-domain normalization, systematic resampling,
//! point estimation and Gaussian moment fitting.
//!
//! Weights are always stored as natural logarithms. A set is *normalized*
//! when `Σ exp(log_weight) = 1` to within `1e-9`.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::rng;

/// Diagonal loading added to every fitted covariance so that downstream
/// Gaussian divergences are always defined.
pub const COVARIANCE_REGULARIZATION: f64 = 1e-6;

/// A single weighted position hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub position: Vector3<f64>,
    pub log_weight: f64,
}

impl Particle {
    pub fn new(position: Vector3<f64>, log_weight: f64) -> Self {
        Self { position, log_weight }
    }
}

/// The weighted particle cloud at one epoch. Every per-particle vector in the
/// fusion pipeline is index-aligned with one of these.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    pub epoch_time: f64,
}

/// IMU odometry over one interval: constant acceleration kinematics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometrySample {
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    pub dt: f64,
}

impl OdometrySample {
    pub fn new(velocity: Vector3<f64>, acceleration: Vector3<f64>, dt: f64) -> Self {
        Self { velocity, acceleration, dt }
    }

    pub fn zero(dt: f64) -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros(), dt)
    }

    /// `v·dt + ½·a·dt²`
    pub fn displacement(&self) -> Vector3<f64> {
        self.velocity * self.dt + self.acceleration * (0.5 * self.dt * self.dt)
    }
}

/// Mean and (regularized) covariance of a particle cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSummary {
    pub mean: Vector3<f64>,
    pub covariance: Matrix3<f64>,
}

impl ParticleSet {
    /// Equally weighted set at the given positions.
    pub fn uniform(positions: impl IntoIterator<Item = Vector3<f64>>, epoch_time: f64) -> Result<Self> {
        let positions: Vec<_> = positions.into_iter().collect();
        if positions.is_empty() {
            return Err(Error::InvalidInput("particle set must contain at least one particle".into()));
        }
        let lw = -(positions.len() as f64).ln();
        Ok(Self {
            particles: positions.into_iter().map(|p| Particle::new(p, lw)).collect(),
            epoch_time,
        })
    }

    /// Build a set from explicit positions and log-weights (not normalized).
    pub fn from_parts(positions: &[Vector3<f64>], log_weights: &[f64], epoch_time: f64) -> Result<Self> {
        if positions.len() != log_weights.len() {
            return Err(Error::LengthMismatch { expected: positions.len(), found: log_weights.len() });
        }
        if positions.is_empty() {
            return Err(Error::InvalidInput("particle set must contain at least one particle".into()));
        }
        for (p, &w) in positions.iter().zip(log_weights) {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidInput("particle position must be finite".into()));
            }
            if w.is_nan() || w == f64::INFINITY {
                return Err(Error::InvalidInput("log-weight must be finite or -inf".into()));
            }
        }
        Ok(Self {
            particles: positions.iter().zip(log_weights).map(|(&p, &w)| Particle::new(p, w)).collect(),
            epoch_time,
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.particles.iter().map(|p| p.position).collect()
    }

    pub fn log_weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.log_weight).collect()
    }

    /// Linear-domain weights, `exp(log_weight)`.
    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.log_weight.exp()).collect()
    }

    /// `ln Σ exp(log_weight)`: the total (marginal) log-likelihood carried by
    /// an unnormalized set.
    pub fn total_log_weight(&self) -> f64 {
        log_sum_exp(&self.log_weights())
    }

    /// Same positions, log-weights replaced.
    pub fn with_log_weights(&self, log_weights: &[f64]) -> Result<Self> {
        if log_weights.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), found: log_weights.len() });
        }
        let mut out = self.clone();
        for (p, &w) in out.particles.iter_mut().zip(log_weights) {
            p.log_weight = w;
        }
        Ok(out)
    }
}

/// Move every particle by the odometry displacement plus zero-mean Gaussian
/// noise of variance `prop_var` per axis. Weights are untouched.
pub fn propagate(ps: &ParticleSet, odo: &OdometrySample, prop_var: f64, seed: u64) -> Result<ParticleSet> {
    if !(prop_var >= 0.0) || !prop_var.is_finite() {
        return Err(Error::InvalidInput(format!("propagation variance must be >= 0, got {prop_var}")));
    }
    if !(odo.dt >= 0.0) {
        return Err(Error::InvalidInput(format!("odometry dt must be >= 0, got {}", odo.dt)));
    }
    let shift = odo.displacement();
    let mut out = ps.clone();
    out.epoch_time = ps.epoch_time + odo.dt;
    if prop_var == 0.0 {
        for p in &mut out.particles {
            p.position += shift;
        }
        return Ok(out);
    }
    let normal = Normal::new(0.0, prop_var.sqrt()).expect("finite positive std");
    let mut rng = rng::rng_from(seed);
    for p in &mut out.particles {
        let noise = Vector3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
        p.position += shift + noise;
    }
    Ok(out)
}

/// Rescale log-weights so they sum to one in the linear domain.
///
/// A set that is already normalized to within `1e-12` is returned bit-for-bit
/// unchanged, which makes the operation idempotent.
pub fn normalize(ps: &ParticleSet) -> Result<ParticleSet> {
    let lse = ps.total_log_weight();
    if lse == f64::NEG_INFINITY {
        return Err(Error::AllWeightsZero);
    }
    if !lse.is_finite() {
        return Err(Error::InvalidInput("log-weights must not be +inf".into()));
    }
    let mut out = ps.clone();
    if lse.abs() <= 1e-12 {
        return Ok(out);
    }
    for p in &mut out.particles {
        p.log_weight -= lse;
    }
    Ok(out)
}

/// Systematic resampling. The output has the same size, equal weights
/// `1/S`, and the expected multiplicity of particle `i` is `S·wᵢ`.
pub fn resample_sir(ps: &ParticleSet, seed: u64) -> Result<ParticleSet> {
    let ps = normalize(ps)?;
    let n = ps.len();
    let weights = ps.weights();
    let mut rng = rng::rng_from(seed);
    // Offsets live in (0, total] so zero-weight particles are never selected.
    let total: f64 = weights.iter().sum();
    let step = total / n as f64;
    let start: f64 = (1.0 - rng.random::<f64>()) * step;
    let lw = -(n as f64).ln();

    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut i = 0;
    for m in 0..n {
        let u = start + m as f64 * step;
        while u > cumulative && i + 1 < n {
            i += 1;
            cumulative += weights[i];
        }
        out.push(Particle::new(ps.particles[i].position, lw));
    }
    Ok(ParticleSet { particles: out, epoch_time: ps.epoch_time })
}

/// Weighted mean position `Σ wᵢ xᵢ`.
pub fn point_estimate(ps: &ParticleSet) -> Vector3<f64> {
    ps.particles
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + p.position * p.log_weight.exp())
}

/// Weighted mean and population covariance, plus `λI` regularization.
pub fn fit_gaussian(ps: &ParticleSet) -> Result<GaussianSummary> {
    if ps.len() < 2 {
        return Err(Error::DegenerateSet(ps.len()));
    }
    let mean = point_estimate(ps);
    let mut covariance = ps.particles.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p.position - mean;
        acc + d * d.transpose() * p.log_weight.exp()
    });
    covariance = (covariance + covariance.transpose()) * 0.5;
    covariance += Matrix3::identity() * COVARIANCE_REGULARIZATION;
    Ok(GaussianSummary { mean, covariance })
}
