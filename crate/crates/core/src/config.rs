//! Scenario configuration.
//!
//! Configs are TOML files with one table per subsystem. Every key has a
//! default; unknown keys and tables are rejected.
//!
//! ```toml
//! [scenario]
//! num_epochs = 60
//! seed = 7
//!
//! [gnss]
//! num_faults = 6
//! bias = 100.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which distribution provides the per-epoch position estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateSource {
    /// Point estimate of the perturbed posterior with the highest total
    /// log-likelihood.
    BestPerturbed,
    /// Point estimate of the unperturbed filter posterior.
    FilterMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub num_epochs: usize,
    /// Seconds between GNSS epochs.
    pub epoch_dt: f64,
    /// Vehicle speed, m/s.
    pub speed: f64,
    /// Largest heading rate drawn for a trajectory segment, rad/s.
    pub max_turn_rate: f64,
    /// Epochs per constant-turn trajectory segment.
    pub segment_epochs: usize,
    pub seed: u64,
    /// `false` disables the camera and fusion stages (GNSS-only baseline).
    pub fusion: bool,
    pub estimate: EstimateSource,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            num_epochs: 60,
            epoch_dt: 1.0,
            speed: 10.0,
            max_turn_rate: 0.05,
            segment_epochs: 10,
            seed: 0,
            fusion: true,
            estimate: EstimateSource::BestPerturbed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnssSection {
    pub num_satellites: usize,
    pub num_faults: usize,
    /// Mean magnitude of an injected range fault, meters.
    pub bias: f64,
    /// Positive-only fault sign (NLOS-like delays) instead of a random sign.
    pub nlos: bool,
    /// Pseudorange noise variance, m².
    pub meas_noise_var: f64,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    /// Geometries with a larger GDOP at the start point are rejected.
    pub max_gdop: f64,
}

impl Default for GnssSection {
    fn default() -> Self {
        Self {
            num_satellites: 12,
            num_faults: 6,
            bias: 100.0,
            nlos: false,
            meas_noise_var: 10.0,
            elevation_min_deg: 15.0,
            elevation_max_deg: 80.0,
            max_gdop: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub num_particles: usize,
    /// Per-axis propagation noise variance, m².
    pub prop_var: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self { num_particles: 120, prop_var: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSection {
    /// Images per GNSS epoch (K).
    pub per_epoch: usize,
    pub fault_prob: f64,
    /// Displacement of a wrong map match, meters.
    pub fault_offset: f64,
    /// Per-axis noise of a correct map match, meters.
    pub sigma: f64,
    /// SoftMax temperature, meters.
    pub tau: f64,
}

impl Default for CameraSection {
    fn default() -> Self {
        Self { per_epoch: 2, fault_prob: 0.2, fault_offset: 50.0, sigma: 2.0, tau: crate::camera::DEFAULT_TAU }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdometrySection {
    /// Per-axis sensor noise on velocity (m/s) and acceleration (m/s²).
    pub noise: f64,
    /// Per-axis velocity perturbation for the integrity replays, m/s.
    pub perturbation: f64,
}

impl Default for OdometrySection {
    fn default() -> Self {
        Self { noise: 0.3, perturbation: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegritySection {
    pub alert_limits: Vec<f64>,
    /// Number of odometry perturbations (M).
    pub perturbations: usize,
    pub delta: f64,
    /// Bound above this declares insufficient integrity.
    pub risk_threshold: f64,
}

impl Default for IntegritySection {
    fn default() -> Self {
        Self {
            alert_limits: vec![8.0, 16.0],
            perturbations: crate::integrity::DEFAULT_PERTURBATIONS,
            delta: crate::integrity::DEFAULT_DELTA,
            risk_threshold: 0.1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub gnss: GnssSection,
    pub filter: FilterSection,
    pub camera: CameraSection,
    pub odometry: OdometrySection,
    pub integrity: IntegritySection,
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidConfig(msg()))
    }
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    check(v >= 0.0 && v.is_finite(), || format!("{name} must be finite and >= 0, got {v}"))
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every field-level constraint plus the satellite geometry.
    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        check(s.num_epochs >= 1, || "scenario.num_epochs must be >= 1".into())?;
        check(s.epoch_dt > 0.0 && s.epoch_dt.is_finite(), || "scenario.epoch_dt must be > 0".into())?;
        nonneg("scenario.speed", s.speed)?;
        nonneg("scenario.max_turn_rate", s.max_turn_rate)?;
        check(s.segment_epochs >= 1, || "scenario.segment_epochs must be >= 1".into())?;

        let g = &self.gnss;
        check(g.num_satellites >= 4, || {
            format!("gnss.num_satellites must be >= 4, got {}", g.num_satellites)
        })?;
        check(g.num_faults < g.num_satellites, || {
            format!(
                "gnss.num_faults ({}) must be less than gnss.num_satellites ({})",
                g.num_faults, g.num_satellites
            )
        })?;
        nonneg("gnss.bias", g.bias)?;
        check(g.meas_noise_var > 0.0 && g.meas_noise_var.is_finite(), || {
            "gnss.meas_noise_var must be > 0".into()
        })?;
        check(
            (-90.0..=90.0).contains(&g.elevation_min_deg)
                && (-90.0..=90.0).contains(&g.elevation_max_deg)
                && g.elevation_min_deg <= g.elevation_max_deg,
            || "gnss elevation bounds must satisfy -90 <= min <= max <= 90".into(),
        )?;
        check(g.max_gdop > 0.0, || "gnss.max_gdop must be > 0".into())?;

        let f = &self.filter;
        check(f.num_particles >= 2, || "filter.num_particles must be >= 2".into())?;
        nonneg("filter.prop_var", f.prop_var)?;

        let c = &self.camera;
        check(c.per_epoch >= 1, || "camera.per_epoch must be >= 1".into())?;
        check((0.0..=1.0).contains(&c.fault_prob), || "camera.fault_prob must lie in [0, 1]".into())?;
        nonneg("camera.fault_offset", c.fault_offset)?;
        nonneg("camera.sigma", c.sigma)?;
        check(c.tau > 0.0 && c.tau.is_finite(), || "camera.tau must be > 0".into())?;

        nonneg("odometry.noise", self.odometry.noise)?;
        nonneg("odometry.perturbation", self.odometry.perturbation)?;

        let i = &self.integrity;
        check(!i.alert_limits.is_empty(), || "integrity.alert_limits must not be empty".into())?;
        check(i.alert_limits.iter().all(|r| *r > 0.0 && r.is_finite()), || {
            "integrity.alert_limits must be positive".into()
        })?;
        check(i.perturbations >= 1, || "integrity.perturbations must be >= 1".into())?;
        check(i.delta > 0.0 && i.delta < 1.0, || "integrity.delta must lie in (0, 1)".into())?;
        check((0.0..=1.0).contains(&i.risk_threshold), || "integrity.risk_threshold must lie in [0, 1]".into())?;

        crate::sim::constellation::check_geometry(self)?;
        Ok(())
    }
}
