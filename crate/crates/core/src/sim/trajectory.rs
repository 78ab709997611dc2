//! Ground-truth vehicle path with true and noisy IMU odometry.
//!
//! The path is a sequence of constant-turn segments at fixed speed. Within an
//! epoch the acceleration is constant, chosen so that the velocity at the end
//! of the epoch is the start velocity rotated by `turn_rate·dt`. Truth is
//! integrated with exactly the kinematics used by the filter, so replaying the
//! true odometry reproduces it.

use nalgebra::{Rotation3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::ScenarioConfig;
use crate::estimator::OdometrySample;
use crate::rng;
use crate::sim::streams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryStep {
    /// Epoch timestamp, seconds.
    pub time: f64,
    /// True position at `time`.
    pub truth: Vector3<f64>,
    /// Odometry over the interval ending at `time`.
    pub true_odometry: OdometrySample,
    pub noisy_odometry: OdometrySample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start: Vector3<f64>,
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    /// Truth at epoch index `t` (0 = start).
    pub fn truth_at(&self, t: usize) -> Vector3<f64> {
        if t == 0 {
            self.start
        } else {
            self.steps[t - 1].truth
        }
    }
}

fn perturb(v: &Vector3<f64>, normal: &Option<Normal<f64>>, rng: &mut impl Rng) -> Vector3<f64> {
    match normal {
        Some(n) => v + Vector3::new(n.sample(rng), n.sample(rng), n.sample(rng)),
        None => *v,
    }
}

pub fn generate_trajectory(cfg: &ScenarioConfig) -> Trajectory {
    let s = &cfg.scenario;
    let dt = s.epoch_dt;
    let seed = s.seed;
    let mut shape_rng = rng::stream(seed, &[streams::TRAJECTORY]);
    let mut noise_rng = rng::stream(seed, &[streams::ODOMETRY]);
    let noise = (cfg.odometry.noise > 0.0).then(|| Normal::new(0.0, cfg.odometry.noise).expect("valid std"));

    let heading: f64 = shape_rng.random_range(0.0..std::f64::consts::TAU);
    let mut velocity = Vector3::new(heading.sin(), heading.cos(), 0.0) * s.speed;
    let mut position = Vector3::zeros();
    let mut turn_rate = 0.0;
    let mut steps = Vec::with_capacity(s.num_epochs);

    for t in 0..s.num_epochs {
        if t % s.segment_epochs == 0 {
            turn_rate = if s.max_turn_rate > 0.0 {
                shape_rng.random_range(-s.max_turn_rate..=s.max_turn_rate)
            } else {
                0.0
            };
        }
        let rotation = Rotation3::from_axis_angle(&Vector3::z_axis(), -turn_rate * dt);
        let next_velocity = rotation * velocity;
        let acceleration = (next_velocity - velocity) / dt;
        let true_odometry = OdometrySample::new(velocity, acceleration, dt);
        position += true_odometry.displacement();
        let noisy_odometry = OdometrySample::new(
            perturb(&velocity, &noise, &mut noise_rng),
            perturb(&acceleration, &noise, &mut noise_rng),
            dt,
        );
        steps.push(TrajectoryStep { time: (t + 1) as f64 * dt, truth: position, true_odometry, noisy_odometry });
        velocity = next_velocity;
    }
    Trajectory { start: Vector3::zeros(), steps }
}
