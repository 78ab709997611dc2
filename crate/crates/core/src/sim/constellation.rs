//! Static satellite constellation in the local ENU frame.

use std::f64::consts::TAU;

use nalgebra::Vector3;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::math::gdop;

/// Distance from the local origin to every satellite, meters.
pub const SHELL_RADIUS: f64 = 20_200_000.0;

const AZIMUTH_OFFSET: f64 = 0.3;

/// Places `num_satellites` on a shell around the origin: one near the top of
/// the elevation band, the rest evenly spread in azimuth with elevations
/// cycling through the band so that any count from four up is well
/// conditioned.
pub fn generate_constellation(cfg: &ScenarioConfig) -> Vec<Vector3<f64>> {
    const ELEVATION_CYCLE: [f64; 4] = [0.0, 0.4, 0.15, 0.6];
    let n = cfg.gnss.num_satellites;
    let (lo, hi) = (cfg.gnss.elevation_min_deg.to_radians(), cfg.gnss.elevation_max_deg.to_radians());
    (0..n)
        .map(|k| {
            let (az, el) = if k == 0 {
                (0.0, hi)
            } else {
                let az = TAU * (k - 1) as f64 / (n - 1) as f64 + AZIMUTH_OFFSET;
                (az, lo + (hi - lo) * ELEVATION_CYCLE[(k - 1) % ELEVATION_CYCLE.len()])
            };
            Vector3::new(el.cos() * az.sin(), el.cos() * az.cos(), el.sin()) * SHELL_RADIUS
        })
        .collect()
}

/// GDOP of the generated constellation at the scenario start point, or an
/// error if the geometry is singular or exceeds `gnss.max_gdop`.
pub fn check_geometry(cfg: &ScenarioConfig) -> Result<f64> {
    let sats = generate_constellation(cfg);
    let g = gdop(&Vector3::zeros(), &sats).ok_or_else(|| {
        Error::InvalidConfig("satellite geometry is singular (GDOP undefined)".into())
    })?;
    if g > cfg.gnss.max_gdop {
        return Err(Error::InvalidConfig(format!(
            "satellite geometry too weak: GDOP {g:.3} exceeds gnss.max_gdop {}",
            cfg.gnss.max_gdop
        )));
    }
    Ok(g)
}
