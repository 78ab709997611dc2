//! Emulated map matcher.
//!
//! A correct match returns the true position at the image time plus
//! `N(0, σ²I)` noise. With probability `fault_prob` the match is wrong and the
//! extracted state is additionally displaced by `fault_offset` in a uniformly
//! random direction. Faults are latent: `quality` is always reported as 1.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::camera::MapMatchResult;
use crate::config::CameraSection;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraObservation {
    pub result: MapMatchResult,
    pub faulty: bool,
}

fn random_direction(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n: f64 = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

/// One map-match result per `(time, true position)` image.
pub fn simulate_camera(images: &[(f64, Vector3<f64>)], cfg: &CameraSection, seed: u64) -> Vec<CameraObservation> {
    let mut rng = rng::rng_from(seed);
    let noise = (cfg.sigma > 0.0).then(|| Normal::new(0.0, cfg.sigma).expect("valid std"));
    images
        .iter()
        .map(|&(time, truth)| {
            let mut state = truth;
            if let Some(n) = &noise {
                state += Vector3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng));
            }
            let faulty = rng.random_bool(cfg.fault_prob);
            if faulty {
                state += random_direction(&mut rng) * cfg.fault_offset;
            }
            CameraObservation {
                result: MapMatchResult { extracted_state: state, match_time: time, quality: 1.0 },
                faulty,
            }
        })
        .collect()
}
