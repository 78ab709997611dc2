//! Fault-tolerant GNSS likelihood: a Gaussian mixture with one component per
//! pseudorange, whose responsibilities come from a single EM step of
//! squared-normal residual voting across the particle cloud.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::estimator::{normalize, ParticleSet};
use crate::math::{gdop, log_sum_exp};

/// Votes below this are clamped before per-particle normalization.
pub const VOTE_FLOOR: f64 = 1e-300;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudorangeMeasurement {
    pub sat_position: Vector3<f64>,
    pub pseudorange: f64,
    /// Per-measurement standard deviation, meters.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnssEpoch {
    pub time: f64,
    pub measurements: Vec<PseudorangeMeasurement>,
}

impl GnssEpoch {
    /// Checks the invariants a positioning epoch must satisfy (at least four
    /// ranges, positive ranges and sigmas). The likelihood functions
    /// themselves accept any non-empty epoch.
    pub fn validate(&self) -> Result<()> {
        if self.measurements.len() < 4 {
            return Err(Error::InvalidInput(format!(
                "GNSS epoch needs at least 4 measurements, got {}",
                self.measurements.len()
            )));
        }
        for m in &self.measurements {
            if !(m.sigma > 0.0) || !(m.pseudorange > 0.0) {
                return Err(Error::InvalidInput("pseudorange and sigma must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }
}

/// Mixture responsibilities over the measurements of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaWeights {
    pub gamma: Vec<f64>,
}

impl GammaWeights {
    pub fn uniform(r: usize) -> Self {
        Self { gamma: vec![1.0 / r as f64; r] }
    }

    /// Normalizes an arbitrary nonnegative vector into valid responsibilities.
    pub fn from_unnormalized(raw: &[f64]) -> Result<Self> {
        if raw.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(Error::InvalidInput("responsibilities must be finite and nonnegative".into()));
        }
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidInput("responsibilities must not all be zero".into()));
        }
        Ok(Self { gamma: raw.iter().map(|g| g / total).collect() })
    }
}

/// Geometric range `‖x − sat‖`. Clock bias is absent by construction.
pub fn expected_pseudorange(x: &Vector3<f64>, sat: &Vector3<f64>) -> f64 {
    (x - sat).norm()
}

/// Component spread inferred from the epoch geometry:
/// `meas_sigma · √GDOP`, evaluated at `receiver`.
pub fn dop_sigma(meas_sigma: f64, receiver: &Vector3<f64>, sats: &[Vector3<f64>]) -> Result<f64> {
    let g = gdop(receiver, sats).ok_or(Error::SingularGeometry(f64::INFINITY))?;
    Ok(meas_sigma * g.sqrt())
}

fn normalized_residual(x: &Vector3<f64>, m: &PseudorangeMeasurement) -> f64 {
    (m.pseudorange - expected_pseudorange(x, &m.sat_position)) / m.sigma
}

/// One EM step for the mixture responsibilities.
///
/// E-step: every particle votes `exp(−r²/2)` for each measurement, where `r` is
/// that measurement's normalized residual at the particle position; votes are
/// floored and normalized per particle. Pooling: `γ_k ∝ Σᵢ wᵢ ṽᵢₖ`.
pub fn compute_gamma(epoch: &GnssEpoch, ps: &ParticleSet) -> Result<GammaWeights> {
    let r = epoch.len();
    if r == 0 {
        return Err(Error::InvalidInput("GNSS epoch has no measurements".into()));
    }
    let ps = normalize(ps)?;
    let mut pooled = vec![0.0; r];
    let mut votes = vec![0.0; r];
    let mut any_vote = false;
    for particle in &ps.particles {
        let w = particle.log_weight.exp();
        let mut raw_nonzero = false;
        for (v, m) in votes.iter_mut().zip(&epoch.measurements) {
            let res = normalized_residual(&particle.position, m);
            let raw = (-0.5 * res * res).exp();
            raw_nonzero |= raw > 0.0;
            *v = raw.max(VOTE_FLOOR);
        }
        any_vote |= raw_nonzero;
        if w == 0.0 {
            continue;
        }
        let total: f64 = votes.iter().sum();
        for (p, v) in pooled.iter_mut().zip(&votes) {
            *p += w * v / total;
        }
    }
    if !any_vote {
        return Err(Error::DegenerateVotes);
    }
    GammaWeights::from_unnormalized(&pooled)
}

/// `ln Σₖ γₖ N(mₖ | ‖x − satₖ‖, σₖ)`, evaluated in the log domain.
pub fn gnss_log_likelihood(x: &Vector3<f64>, epoch: &GnssEpoch, g: &GammaWeights) -> Result<f64> {
    if g.gamma.len() != epoch.len() {
        return Err(Error::LengthMismatch { expected: epoch.len(), found: g.gamma.len() });
    }
    let terms: Vec<f64> = epoch
        .measurements
        .iter()
        .zip(&g.gamma)
        .map(|(m, &gamma)| {
            let res = normalized_residual(x, m);
            gamma.ln() - 0.5 * res * res - m.sigma.ln() - LN_SQRT_2PI
        })
        .collect();
    Ok(log_sum_exp(&terms))
}

/// Per-particle GNSS log-likelihoods with the responsibilities computed from
/// the same cloud.
pub fn gnss_log_likelihoods(ps: &ParticleSet, epoch: &GnssEpoch) -> Result<(Vec<f64>, GammaWeights)> {
    let gamma = compute_gamma(epoch, ps)?;
    let ll = ps
        .particles
        .iter()
        .map(|p| gnss_log_likelihood(&p.position, epoch, &gamma))
        .collect::<Result<Vec<_>>>()?;
    Ok((ll, gamma))
}

/// Reweights the cloud by the GNSS mixture likelihood and renormalizes. The
/// resulting weight vector is the GNSS distribution consumed by fusion.
pub fn update_weights_gnss(ps: &ParticleSet, epoch: &GnssEpoch) -> Result<(ParticleSet, GammaWeights)> {
    let prior = normalize(ps)?;
    let (ll, gamma) = gnss_log_likelihoods(&prior, epoch)?;
    let lw: Vec<f64> = prior.particles.iter().zip(&ll).map(|(p, l)| p.log_weight + l).collect();
    let posterior = normalize(&prior.with_log_weights(&lw)?)?;
    Ok((posterior, gamma))
}
