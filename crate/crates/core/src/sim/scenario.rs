//! The per-epoch estimation and integrity pipeline over an emulated scenario.
//!
//! Each epoch:
//! 1. the filter prior is propagated with the noisy odometry, weighted by the
//!    GNSS mixture likelihood, fused with the KL-weighted camera experts, and
//!    resampled to become the next prior;
//! 2. the same chain is replayed `M` times from the same prior with perturbed
//!    odometry (same propagation noise, same measurements), giving the
//!    ensemble for the integrity bound;
//! 3. the estimate is the point estimate of the replay with the highest total
//!    log-likelihood (or of the unperturbed posterior, if configured).

use nalgebra::Vector3;
use rand_distr::{Distribution, Normal};

use crate::camera::{camera_expert, MapMatchResult};
use crate::config::{EstimateSource, ScenarioConfig};
use crate::error::{Error, Result};
use crate::estimator::{normalize, point_estimate, propagate, resample_sir, OdometrySample, ParticleSet};
use crate::fusion::{fuse_experts, fuse_joint, GnssDistribution};
use crate::gnss::{dop_sigma, expected_pseudorange, gnss_log_likelihoods, GammaWeights, GnssEpoch, PseudorangeMeasurement};
use crate::integrity::{epsilon_gap, report_from_parts, PerturbationEnsemble};
use crate::math::log_sum_exp;
use crate::rng;
use crate::sim::camera::simulate_camera;
use crate::sim::constellation::generate_constellation;
use crate::sim::faults::inject_gnss_faults;
use crate::sim::streams;
use crate::sim::trajectory::generate_trajectory;

/// Integrity outcome for one alert limit at one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlertRisk {
    pub alert_limit: f64,
    pub empirical_risk: f64,
    pub bound: f64,
    pub reference_risk: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub time: f64,
    pub truth: Vector3<f64>,
    pub estimate: Vector3<f64>,
    /// One entry per configured alert limit, in config order.
    pub risks: Vec<AlertRisk>,
    pub gamma: Vec<f64>,
    pub alphas: Vec<f64>,
    pub fault_mask_gnss: Vec<bool>,
    pub fault_mask_camera: Vec<bool>,
}

impl EpochRecord {
    pub fn error(&self) -> f64 {
        (self.estimate - self.truth).norm()
    }

    pub fn risk(&self, alert_limit: f64) -> Option<&AlertRisk> {
        self.risks.iter().find(|r| r.alert_limit == alert_limit)
    }
}

/// Measurements available at one epoch. Each camera image carries the
/// odometry that moves its match time forward to the epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMeasurements {
    pub gnss: GnssEpoch,
    pub cameras: Vec<(MapMatchResult, OdometrySample)>,
}

/// Result of one propagate-update-fuse pass, before resampling.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochPosterior {
    /// Normalized posterior.
    pub posterior: ParticleSet,
    /// `ln Σᵢ prior_i · L_gnss,i · Q*_i` (the Q* factor only when fusing).
    pub total_log_likelihood: f64,
    pub gamma: GammaWeights,
    pub alphas: Vec<f64>,
}

/// Propagates `prior` and applies the GNSS update and, if `fusion` is set and
/// there are camera images, the KL-weighted camera fusion.
pub fn fuse_epoch(
    prior: &ParticleSet,
    odometry: &OdometrySample,
    prop_var: f64,
    prop_seed: u64,
    meas: &EpochMeasurements,
    tau: f64,
    fusion: bool,
) -> Result<EpochPosterior> {
    let prior = normalize(prior)?;
    let propagated = propagate(&prior, odometry, prop_var, prop_seed)?;
    let (ll, gamma) = gnss_log_likelihoods(&propagated, &meas.gnss)?;
    let lw: Vec<f64> = propagated.particles.iter().zip(&ll).map(|(p, l)| p.log_weight + l).collect();
    let gnss_total = log_sum_exp(&lw);
    if gnss_total == f64::NEG_INFINITY {
        return Err(Error::AllWeightsZero);
    }
    let gnss_post = normalize(&propagated.with_log_weights(&lw)?)?;

    if !fusion || meas.cameras.is_empty() {
        return Ok(EpochPosterior { posterior: gnss_post, total_log_likelihood: gnss_total, gamma, alphas: Vec::new() });
    }

    let p = GnssDistribution::from_particles(&gnss_post)?;
    let experts = meas
        .cameras
        .iter()
        .map(|(mm, odo)| camera_expert(mm, odo, &propagated, tau))
        .collect::<Result<Vec<_>>>()?;
    let moe = fuse_experts(&experts, &p)?;
    let joint = fuse_joint(&p, &moe.mixture)?;
    let total = gnss_total + log_sum_exp(&joint.log_probs);
    let posterior = normalize(&propagated.with_log_weights(&joint.log_probs)?)?;
    Ok(EpochPosterior { posterior, total_log_likelihood: total, gamma, alphas: moe.alphas })
}

fn at_epoch(epoch: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::AtEpoch { epoch, source: Box::new(e) }
}

fn gaussian_vec(normal: &Option<Normal<f64>>, rng: &mut impl rand::Rng) -> Vector3<f64> {
    match normal {
        Some(n) => Vector3::new(n.sample(rng), n.sample(rng), n.sample(rng)),
        None => Vector3::zeros(),
    }
}

/// Runs the whole scenario. Fully determined by `cfg` (including its seed).
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    let seed = cfg.scenario.seed;
    let traj = generate_trajectory(cfg);
    let sats = generate_constellation(cfg);
    let meas_sigma = cfg.gnss.meas_noise_var.sqrt();
    let k = cfg.camera.per_epoch;
    let m = cfg.integrity.perturbations;
    let prop_var = cfg.filter.prop_var;
    let tau = cfg.camera.tau;
    let fusion = cfg.scenario.fusion;

    let init_noise = (prop_var > 0.0).then(|| Normal::new(0.0, prop_var.sqrt()).expect("valid std"));
    let pert_noise = (cfg.odometry.perturbation > 0.0)
        .then(|| Normal::new(0.0, cfg.odometry.perturbation).expect("valid std"));

    let mut init_rng = rng::stream(seed, &[streams::INIT]);
    let mut prior = ParticleSet::uniform(
        (0..cfg.filter.num_particles).map(|_| traj.start + gaussian_vec(&init_noise, &mut init_rng)),
        0.0,
    )?;
    let mut prev_mean = prior.clone();
    let mut records = Vec::with_capacity(traj.steps.len());

    for (t, step) in traj.steps.iter().enumerate() {
        let epoch = t as u64;
        let prev_truth = traj.truth_at(t);
        let t0 = step.time - step.true_odometry.dt;

        // GNSS measurements with per-epoch fault draw.
        let true_ranges: Vec<f64> = sats.iter().map(|s| expected_pseudorange(&step.truth, s)).collect();
        let (ranges, gnss_mask) =
            inject_gnss_faults(&true_ranges, &cfg.gnss, rng::derive_seed(seed, &[streams::GNSS, epoch]))
                .map_err(at_epoch(t))?;
        let sigma = dop_sigma(meas_sigma, &point_estimate(&prior), &sats).map_err(at_epoch(t))?;
        let gnss = GnssEpoch {
            time: step.time,
            measurements: sats
                .iter()
                .zip(&ranges)
                .map(|(s, &r)| PseudorangeMeasurement { sat_position: *s, pseudorange: r, sigma })
                .collect(),
        };

        // K images strictly inside the interval, carried forward with noisy odometry.
        let dt = step.true_odometry.dt;
        let offsets: Vec<f64> = (0..k).map(|j| dt * (j + 1) as f64 / (k + 1) as f64).collect();
        let images: Vec<(f64, Vector3<f64>)> = offsets
            .iter()
            .map(|&tau_j| {
                let odo = OdometrySample { dt: tau_j, ..step.true_odometry };
                (t0 + tau_j, prev_truth + odo.displacement())
            })
            .collect();
        let observations = simulate_camera(&images, &cfg.camera, rng::derive_seed(seed, &[streams::CAMERA, epoch]));
        let noisy = step.noisy_odometry;
        let cameras = observations
            .iter()
            .zip(&offsets)
            .map(|(o, &tau_j)| {
                let carry = OdometrySample::new(noisy.velocity + noisy.acceleration * tau_j, noisy.acceleration, dt - tau_j);
                (o.result, carry)
            })
            .collect();
        let meas = EpochMeasurements { gnss, cameras };

        let prop_seed = rng::derive_seed(seed, &[streams::PROPAGATION, epoch]);
        let nominal = fuse_epoch(&prior, &noisy, prop_var, prop_seed, &meas, tau, fusion).map_err(at_epoch(t))?;

        let replays = (0..m)
            .map(|u| {
                let mut prng = rng::stream(seed, &[streams::PERTURBATION, epoch, u as u64]);
                let odo = OdometrySample { velocity: noisy.velocity + gaussian_vec(&pert_noise, &mut prng), ..noisy };
                fuse_epoch(&prior, &odo, prop_var, prop_seed, &meas, tau, fusion)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(at_epoch(t))?;

        let estimate = match cfg.scenario.estimate {
            EstimateSource::BestPerturbed => {
                let best = replays
                    .iter()
                    .reduce(|a, b| if b.total_log_likelihood > a.total_log_likelihood { b } else { a })
                    .expect("M >= 1");
                point_estimate(&best.posterior)
            }
            EstimateSource::FilterMean => point_estimate(&nominal.posterior),
        };

        let ensemble = PerturbationEnsemble::new(replays.into_iter().map(|r| r.posterior).collect())
            .map_err(at_epoch(t))?;
        let epsilon = epsilon_gap(&ensemble.mean_posterior, &prev_mean, m, cfg.integrity.delta).map_err(at_epoch(t))?;
        let risks = cfg
            .integrity
            .alert_limits
            .iter()
            .map(|&r| {
                let rep = report_from_parts(&ensemble, epsilon, r, Some(&step.truth));
                AlertRisk {
                    alert_limit: r,
                    empirical_risk: rep.empirical_risk,
                    bound: rep.bound,
                    reference_risk: rep.reference_risk.unwrap_or(0.0),
                }
            })
            .collect();

        records.push(EpochRecord {
            time: step.time,
            truth: step.truth,
            estimate,
            risks,
            gamma: nominal.gamma.gamma.clone(),
            alphas: nominal.alphas.clone(),
            fault_mask_gnss: gnss_mask,
            fault_mask_camera: observations.iter().map(|o| o.faulty).collect(),
        });

        prior = resample_sir(&nominal.posterior, rng::derive_seed(seed, &[streams::RESAMPLE, epoch]))
            .map_err(at_epoch(t))?;
        prev_mean = ensemble.mean_posterior;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.scenario.num_epochs = 8;
        cfg
    }

    #[test]
    fn emits_one_record_per_epoch_with_consistent_lengths() {
        let cfg = small();
        let recs = run_scenario(&cfg).unwrap();
        assert_eq!(recs.len(), 8);
        for r in &recs {
            assert_eq!(r.gamma.len(), 12);
            assert_eq!(r.alphas.len(), cfg.camera.per_epoch);
            assert_eq!(r.fault_mask_gnss.iter().filter(|f| **f).count(), cfg.gnss.num_faults);
            assert_eq!(r.fault_mask_camera.len(), cfg.camera.per_epoch);
            assert_eq!(r.risks.len(), 2);
            for risk in &r.risks {
                assert!(risk.bound >= risk.empirical_risk && risk.bound <= 1.0);
            }
        }
    }

    #[test]
    fn same_seed_same_records() {
        let cfg = small();
        assert_eq!(run_scenario(&cfg).unwrap(), run_scenario(&cfg).unwrap());
    }

    #[test]
    fn gnss_only_mode_has_no_alphas() {
        let mut cfg = small();
        cfg.scenario.fusion = false;
        for r in run_scenario(&cfg).unwrap() {
            assert!(r.alphas.is_empty());
        }
    }
}
