//! Per-epoch PAC-Bayes upper bound on the probability of hazardously
//! misleading information (HMI).
//!
//! The bound is `R_M + t`, where `R_M` is the empirical hazard rate over `M`
//! odometry-perturbed posteriors and `t` approximately inverts the Bernoulli
//! divergence `D(R_M ‖ R_M + t) = ε`. The gap `ε` combines the divergence of
//! the current mean posterior from the previous one (both moment-matched to
//! Gaussians) with the confidence level `δ`.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::estimator::{fit_gaussian, normalize, point_estimate, GaussianSummary, Particle, ParticleSet};

/// Clamp for the empirical risk before the divergence inversion, which is
/// singular at 0 and 1.
pub const Q_FLOOR: f64 = 1e-6;
pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_PERTURBATIONS: usize = 10;

/// `M` posteriors from perturbed odometry replays plus their index-wise mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationEnsemble {
    pub posteriors: Vec<ParticleSet>,
    pub mean_posterior: ParticleSet,
}

impl PerturbationEnsemble {
    /// Builds the ensemble and its mean posterior: at each particle index the
    /// position and the linear weight are averaged over the `M` posteriors,
    /// then the weights are renormalized.
    pub fn new(posteriors: Vec<ParticleSet>) -> Result<Self> {
        let first = posteriors.first().ok_or_else(|| Error::InvalidInput("ensemble needs M >= 1".into()))?;
        let s = first.len();
        let time = first.epoch_time;
        let normalized = posteriors.iter().map(normalize).collect::<Result<Vec<_>>>()?;
        for p in &normalized {
            if p.len() != s {
                return Err(Error::LengthMismatch { expected: s, found: p.len() });
            }
            if p.epoch_time != time {
                return Err(Error::InvalidInput("ensemble posteriors must share epoch_time".into()));
            }
        }
        let m = normalized.len() as f64;
        let particles = (0..s)
            .map(|i| {
                let (pos, w) = normalized.iter().fold((Vector3::zeros(), 0.0), |(pos, w), p| {
                    let q = &p.particles[i];
                    (pos + q.position, w + q.log_weight.exp())
                });
                Particle::new(pos / m, (w / m).ln())
            })
            .collect();
        let mean_posterior = normalize(&ParticleSet { particles, epoch_time: time })?;
        Ok(Self { posteriors: normalized, mean_posterior })
    }

    pub fn len(&self) -> usize {
        self.posteriors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posteriors.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskReport {
    pub empirical_risk: f64,
    pub epsilon: f64,
    pub divergence_term: f64,
    pub bound: f64,
    pub reference_risk: Option<f64>,
    pub alert_limit: f64,
}

/// 1 when `x` is at least `r` from the posterior's point estimate.
pub fn classification_loss(x: &Vector3<f64>, post: &ParticleSet, r: f64) -> u8 {
    loss_against(x, &point_estimate(post), r)
}

fn loss_against(x: &Vector3<f64>, estimate: &Vector3<f64>, r: f64) -> u8 {
    u8::from((x - estimate).norm() >= r)
}

/// Mean over the ensemble of the mean-posterior mass classified hazardous
/// against each perturbed posterior.
pub fn empirical_risk(ens: &PerturbationEnsemble, r: f64) -> f64 {
    let m = ens.posteriors.len() as f64;
    let estimates: Vec<_> = ens.posteriors.iter().map(point_estimate).collect();
    let total: f64 = estimates
        .iter()
        .map(|est| {
            ens.mean_posterior
                .particles
                .iter()
                .map(|p| p.log_weight.exp() * f64::from(loss_against(&p.position, est, r)))
                .sum::<f64>()
        })
        .sum();
    (total / m).clamp(0.0, 1.0)
}

/// Closed-form KL divergence between two 3-D Gaussians, `KL(a ‖ b)`.
pub fn gaussian_kl(a: &GaussianSummary, b: &GaussianSummary) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let chol_b = b
        .covariance
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("covariance is not positive definite".into()))?;
    let chol_a = a
        .covariance
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("covariance is not positive definite".into()))?;
    let diff = b.mean - a.mean;
    let trace = chol_b.solve(&a.covariance).trace();
    let mahalanobis = diff.dot(&chol_b.solve(&diff));
    let ln_det = |l: &nalgebra::Matrix3<f64>| 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let ln_det_ratio = ln_det(&chol_b.l()) - ln_det(&chol_a.l());
    Ok((0.5 * (trace + mahalanobis - 3.0 + ln_det_ratio)).max(0.0))
}

/// `ε = (KL(N_cur ‖ N_prev) + ln((M+1)/δ)) / M`.
pub fn epsilon_gap(cur: &ParticleSet, prev: &ParticleSet, m: usize, delta: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidInput("M must be >= 1".into()));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidInput(format!("delta must lie in (0, 1], got {delta}")));
    }
    let kl = gaussian_kl(&fit_gaussian(cur)?, &fit_gaussian(prev)?)?;
    Ok(epsilon_from_kl(kl, m, delta))
}

pub fn epsilon_from_kl(kl: f64, m: usize, delta: f64) -> f64 {
    let m = m as f64;
    (kl + ((m + 1.0) / delta).ln()) / m
}

/// Approximate inverse Bernoulli divergence, `√(2ε·q(1−q))`, with `q`
/// clamped to `[Q_FLOOR, 1 − Q_FLOOR]`.
pub fn inverse_bernoulli(q: f64, eps: f64) -> f64 {
    let q = q.clamp(Q_FLOOR, 1.0 - Q_FLOOR);
    (2.0 * eps.max(0.0) / (1.0 / q + 1.0 / (1.0 - q))).sqrt()
}

/// Weighted mass of the mean posterior at least `r` from the true position.
pub fn reference_risk(mean_posterior: &ParticleSet, truth: &Vector3<f64>, r: f64) -> f64 {
    mean_posterior
        .particles
        .iter()
        .map(|p| p.log_weight.exp() * f64::from(loss_against(&p.position, truth, r)))
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// Assembles the full report for one alert limit. `cur` and `prev` are the
/// current and previous mean posteriors.
pub fn risk_bound(
    ens: &PerturbationEnsemble,
    cur: &ParticleSet,
    prev: &ParticleSet,
    r: f64,
    delta: f64,
    truth: Option<&Vector3<f64>>,
) -> Result<RiskReport> {
    let epsilon = epsilon_gap(cur, prev, ens.len(), delta)?;
    Ok(report_from_parts(ens, epsilon, r, truth))
}

/// Same as [`risk_bound`] with a precomputed gap; the gap does not depend on
/// the alert limit, so callers sweeping several limits compute it once.
pub fn report_from_parts(ens: &PerturbationEnsemble, epsilon: f64, r: f64, truth: Option<&Vector3<f64>>) -> RiskReport {
    let empirical = empirical_risk(ens, r);
    let divergence_term = inverse_bernoulli(empirical, epsilon);
    RiskReport {
        empirical_risk: empirical,
        epsilon,
        divergence_term,
        bound: (empirical + divergence_term).min(1.0),
        reference_risk: truth.map(|t| reference_risk(&ens.mean_posterior, t, r)),
        alert_limit: r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix3;

    fn cloud(center: Vector3<f64>, offsets: &[[f64; 3]]) -> ParticleSet {
        ParticleSet::uniform(offsets.iter().map(|o| center + Vector3::from(*o)), 1.0).unwrap()
    }

    #[test]
    fn loss_boundary_is_inclusive() {
        let post = cloud(Vector3::zeros(), &[[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]);
        assert_eq!(classification_loss(&Vector3::zeros(), &post, 4.0), 0);
        assert_eq!(classification_loss(&Vector3::new(0.0, 4.0, 0.0), &post, 4.0), 1);
        assert_eq!(classification_loss(&Vector3::new(0.0, 2.0, 0.0), &post, 4.0), 0);
    }

    #[test]
    fn empirical_risk_examples() {
        let tight = cloud(Vector3::zeros(), &[[0.1, 0.0, 0.0], [-0.1, 0.0, 0.0]]);
        let ens = PerturbationEnsemble::new(vec![tight.clone(); 3]).unwrap();
        assert_eq!(empirical_risk(&ens, 8.0), 0.0);

        // One perturbed posterior agrees with the mean, one sits 100 m away.
        let far = cloud(Vector3::new(100.0, 0.0, 0.0), &[[0.1, 0.0, 0.0], [-0.1, 0.0, 0.0]]);
        let mut ens = PerturbationEnsemble::new(vec![tight.clone(), far]).unwrap();
        ens.mean_posterior = tight.clone();
        assert_abs_diff_eq!(empirical_risk(&ens, 8.0), 0.5, epsilon = 1e-15);

        let mut ens = PerturbationEnsemble::new(vec![tight.clone()]).unwrap();
        ens.mean_posterior = cloud(Vector3::new(0.0, 50.0, 0.0), &[[0.0; 3], [1.0, 0.0, 0.0]]);
        assert_eq!(empirical_risk(&ens, 8.0), 1.0);
    }

    #[test]
    fn mean_posterior_averages_weights_and_positions() {
        let a = ParticleSet::from_parts(&[Vector3::zeros(), Vector3::new(2.0, 0.0, 0.0)], &[0.9f64.ln(), 0.1f64.ln()], 3.0).unwrap();
        let b = ParticleSet::from_parts(&[Vector3::new(0.0, 2.0, 0.0), Vector3::new(2.0, 2.0, 0.0)], &[0.5f64.ln(), 0.5f64.ln()], 3.0).unwrap();
        let ens = PerturbationEnsemble::new(vec![a, b]).unwrap();
        let w = ens.mean_posterior.weights();
        assert_abs_diff_eq!(w[0], 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.3, epsilon = 1e-12);
        assert_eq!(ens.mean_posterior.particles[0].position, Vector3::new(0.0, 1.0, 0.0));
        assert_eq!(ens.mean_posterior.epoch_time, 3.0);
    }

    #[test]
    fn gaussian_kl_examples() {
        let a = GaussianSummary { mean: Vector3::zeros(), covariance: Matrix3::identity() };
        assert_eq!(gaussian_kl(&a, &a).unwrap(), 0.0);
        let b = GaussianSummary { mean: Vector3::new(1.0, 0.0, 0.0), covariance: Matrix3::identity() };
        assert_abs_diff_eq!(gaussian_kl(&a, &b).unwrap(), 0.5, epsilon = 1e-14);
        let wide = GaussianSummary { mean: Vector3::zeros(), covariance: Matrix3::identity() * 2.0 };
        assert_abs_diff_eq!(gaussian_kl(&wide, &a).unwrap(), 0.5 * (6.0 - 3.0 + (1.0f64 / 8.0).ln()), epsilon = 1e-14);
        assert_abs_diff_eq!(gaussian_kl(&wide, &a).unwrap(), 0.4603, epsilon = 1e-4);
    }

    #[test]
    fn epsilon_examples() {
        let s = cloud(Vector3::zeros(), &[[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert_abs_diff_eq!(epsilon_gap(&s, &s, 10, 0.05).unwrap(), 220f64.ln() / 10.0, epsilon = 1e-14);
        assert_abs_diff_eq!(epsilon_gap(&s, &s, 1, 1.0).unwrap(), 2f64.ln(), epsilon = 1e-14);
        assert!(epsilon_gap(&s, &s, 20, 0.05).unwrap() < epsilon_gap(&s, &s, 10, 0.05).unwrap());
        assert!(epsilon_gap(&s, &s, 0, 0.05).is_err());
    }

    #[test]
    fn inverse_bernoulli_examples() {
        assert_eq!(inverse_bernoulli(0.3, 0.0), 0.0);
        assert_abs_diff_eq!(inverse_bernoulli(0.5, 0.02), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(inverse_bernoulli(0.1, 0.01), (2.0f64 * 0.01 * 0.09).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(inverse_bernoulli(0.1, 0.01), 0.04243, epsilon = 1e-5);
    }

    #[test]
    fn bound_clamps_and_floors() {
        let s = cloud(Vector3::zeros(), &[[0.1, 0.0, 0.0], [-0.1, 0.0, 0.0]]);
        let ens = PerturbationEnsemble::new(vec![s.clone(); 10]).unwrap();
        let rep = risk_bound(&ens, &s, &s, 8.0, 0.05, None).unwrap();
        assert_eq!(rep.empirical_risk, 0.0);
        let eps = 220f64.ln() / 10.0;
        assert_abs_diff_eq!(rep.bound, (2.0 * eps * Q_FLOOR * (1.0 - Q_FLOOR)).sqrt(), epsilon = 1e-15);
        assert!(rep.bound < 2e-3);
        assert_eq!(rep.reference_risk, None);

        let mut ens = ens;
        ens.mean_posterior = cloud(Vector3::new(0.0, 50.0, 0.0), &[[0.0; 3], [1.0, 0.0, 0.0]]);
        let rep = report_from_parts(&ens, eps, 8.0, Some(&Vector3::zeros()));
        assert_eq!(rep.empirical_risk, 1.0);
        assert_eq!(rep.bound, 1.0);
        assert_eq!(rep.reference_risk, Some(1.0));
    }

    #[test]
    fn reference_risk_examples() {
        let ps = ParticleSet::from_parts(
            &[Vector3::new(10.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0)],
            &[0.3f64.ln(), 0.7f64.ln()],
            0.0,
        )
        .unwrap();
        assert_abs_diff_eq!(reference_risk(&ps, &Vector3::zeros(), 8.0), 0.3, epsilon = 1e-12);
        assert_eq!(reference_risk(&ps, &Vector3::zeros(), 20.0), 0.0);
        assert_abs_diff_eq!(reference_risk(&ps, &Vector3::zeros(), 0.5), 1.0, epsilon = 1e-12);
    }
}
