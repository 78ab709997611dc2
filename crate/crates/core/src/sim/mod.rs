//! Emulated scenarios: ground truth, satellite geometry, odometry, injected
//! GNSS and camera faults, the per-epoch pipeline, and summary metrics.

pub mod camera;
pub mod constellation;
pub mod faults;
pub mod metrics;
pub mod scenario;
pub mod trajectory;

pub use metrics::{compute_metrics, LimitMetrics, MetricsReport};
pub use scenario::{run_scenario, AlertRisk, EpochRecord};
pub use trajectory::{generate_trajectory, Trajectory, TrajectoryStep};

/// Labels separating the random streams of one scenario.
pub(crate) mod streams {
    pub const TRAJECTORY: u64 = 1;
    pub const ODOMETRY: u64 = 2;
    pub const GNSS: u64 = 3;
    pub const CAMERA: u64 = 4;
    pub const PROPAGATION: u64 = 5;
    pub const PERTURBATION: u64 = 6;
    pub const RESAMPLE: u64 = 7;
    pub const INIT: u64 = 8;
}
