//! KL-weighted mixture of camera experts and the joint GNSS-camera posterior.
//!
//! Each expert `Qʲ` gets the weight that minimizes
//! `KL(αⱼ Qʲ ‖ P) = αⱼ Σ Q ln αⱼ + αⱼ Σ Q ln Q − αⱼ Σ Q ln P`
//! over `αⱼ > 0`, which has the closed form `αⱼ = exp(Σ Q ln(P/Q) / Σ Q − 1)`.
//! The weights are then normalized and used to mix the experts; the mixture
//! multiplies the GNSS distribution to form the joint posterior.

use crate::camera::ExpertDistribution;
use crate::error::{Error, Result};

/// Floor applied to every probability before a logarithm or ratio.
pub const PROB_FLOOR: f64 = 1e-12;

/// Normalized particle weights after the GNSS update.
#[derive(Debug, Clone, PartialEq)]
pub struct GnssDistribution {
    pub probs: Vec<f64>,
}

impl GnssDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let e = ExpertDistribution::new(probs)?;
        Ok(Self { probs: e.probs })
    }

    pub fn from_particles(ps: &crate::estimator::ParticleSet) -> Result<Self> {
        let ps = crate::estimator::normalize(ps)?;
        Ok(Self { probs: ps.weights() })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureOfExperts {
    pub experts: Vec<ExpertDistribution>,
    pub alphas_raw: Vec<f64>,
    pub alphas: Vec<f64>,
    pub mixture: ExpertDistribution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointPosterior {
    pub log_probs: Vec<f64>,
}

fn floor(p: f64) -> f64 {
    p.max(PROB_FLOOR)
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}

/// `Σ p ln(p/q)` with `0·ln 0 = 0` and `q` floored.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_len(p.len(), q.len())?;
    Ok(p
        .iter()
        .zip(q)
        .filter(|(&pz, _)| pz > 0.0)
        .map(|(&pz, &qz)| pz * (floor(pz).ln() - floor(qz).ln()))
        .sum())
}

/// Closed-form KL-optimal (unnormalized) weight of one expert against the
/// GNSS distribution. Always strictly positive.
pub fn optimal_alpha(q: &ExpertDistribution, p: &GnssDistribution) -> Result<f64> {
    check_len(q.len(), p.len())?;
    let (num, mass) = q.probs.iter().zip(&p.probs).fold((0.0, 0.0), |(num, mass), (&qi, &pi)| {
        let qf = floor(qi);
        (num + qf * (floor(pi).ln() - qf.ln()), mass + qf)
    });
    Ok((num / mass - 1.0).exp())
}

/// `αⱼ / Σ α`.
pub fn normalize_alphas(alphas_raw: &[f64]) -> Result<Vec<f64>> {
    if alphas_raw.is_empty() {
        return Err(Error::InvalidInput("no expert weights".into()));
    }
    if alphas_raw.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidInput("expert weights must be positive and finite".into()));
    }
    let total: f64 = alphas_raw.iter().sum();
    Ok(alphas_raw.iter().map(|a| a / total).collect())
}

/// Convex combination `Σⱼ α*ⱼ Qʲ`.
pub fn mixture_of_experts(experts: &[ExpertDistribution], alphas: &[f64]) -> Result<ExpertDistribution> {
    check_len(experts.len(), alphas.len())?;
    let first = experts.first().ok_or_else(|| Error::InvalidInput("no experts".into()))?;
    let s = first.len();
    let mut mix = vec![0.0; s];
    for (e, &a) in experts.iter().zip(alphas) {
        check_len(s, e.len())?;
        for (m, q) in mix.iter_mut().zip(&e.probs) {
            *m += a * q;
        }
    }
    Ok(ExpertDistribution { probs: mix })
}

/// Weights every expert against `p`, normalizes the weights and mixes.
pub fn fuse_experts(experts: &[ExpertDistribution], p: &GnssDistribution) -> Result<MixtureOfExperts> {
    let alphas_raw = experts.iter().map(|q| optimal_alpha(q, p)).collect::<Result<Vec<_>>>()?;
    let alphas = normalize_alphas(&alphas_raw)?;
    let mixture = mixture_of_experts(experts, &alphas)?;
    Ok(MixtureOfExperts { experts: experts.to_vec(), alphas_raw, alphas, mixture })
}

/// `ln P + ln Q*`, both floored. Renormalize downstream.
pub fn fuse_joint(p: &GnssDistribution, qstar: &ExpertDistribution) -> Result<JointPosterior> {
    check_len(p.len(), qstar.len())?;
    Ok(JointPosterior {
        log_probs: p.probs.iter().zip(&qstar.probs).map(|(&a, &b)| floor(a).ln() + floor(b).ln()).collect(),
    })
}
