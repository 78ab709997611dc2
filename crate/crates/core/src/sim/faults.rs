//! Pseudorange noise and bias-fault injection.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::GnssSection;
use crate::error::{Error, Result};
use crate::rng;

/// Adds `N(0, meas_noise_var)` noise to every range and a bias of magnitude
/// `N(bias, (0.1·bias)²)` to a random subset of `num_faults` ranges. The sign
/// of each bias is random unless `nlos` is set, in which case it is positive.
/// Returns the measured ranges and the fault mask.
pub fn inject_gnss_faults(true_ranges: &[f64], cfg: &GnssSection, seed: u64) -> Result<(Vec<f64>, Vec<bool>)> {
    let r = true_ranges.len();
    if cfg.num_faults > r {
        return Err(Error::InvalidInput(format!("{} faults requested for {r} ranges", cfg.num_faults)));
    }
    let mut rng = rng::rng_from(seed);
    let noise = Normal::new(0.0, cfg.meas_noise_var.sqrt()).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let bias = Normal::new(cfg.bias, 0.1 * cfg.bias).map_err(|e| Error::InvalidInput(e.to_string()))?;

    let mut mask = vec![false; r];
    for k in sample(&mut rng, r, cfg.num_faults) {
        mask[k] = true;
    }
    let ranges = true_ranges
        .iter()
        .zip(&mask)
        .map(|(&range, &faulty)| {
            let mut m = range + noise.sample(&mut rng);
            if faulty {
                let sign = if cfg.nlos || rng.random_bool(0.5) { 1.0 } else { -1.0 };
                m += sign * bias.sample(&mut rng);
            }
            m
        })
        .collect();
    Ok((ranges, mask))
}
