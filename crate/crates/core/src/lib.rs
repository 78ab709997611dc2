//! Joint state estimation and integrity monitoring for GNSS-camera fusion.
//!
//! A particle filter tracks 3-D position. Each epoch the cloud is propagated
//! with odometry, weighted by a fault-tolerant GNSS mixture likelihood
//! ([`gnss`]), combined with camera expert distributions whose weights
//! minimize their KL divergence from the GNSS distribution ([`camera`],
//! [`fusion`]), and resampled ([`estimator`]). A PAC-Bayes bound on the
//! probability of hazardously misleading information is computed from
//! odometry-perturbed replays of the same epoch ([`integrity`]).
//!
//! [`sim`] generates emulated scenarios with injected GNSS and camera faults,
//! runs the full pipeline, and reduces the per-epoch records to metrics.

pub mod camera;
pub mod config;
pub mod error;
pub mod estimator;
pub mod fusion;
pub mod gnss;
pub mod integrity;
pub mod math;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use nalgebra::Vector3;
