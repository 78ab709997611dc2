//! Command implementations behind the `pfint` binary: single runs, parameter
//! sweeps and offline metric recomputation, with CSV and manifest output.

pub mod commands;
pub mod error;
pub mod format;
pub mod manifest;
pub mod records;

pub use commands::{cmd_metrics, cmd_run, cmd_sweep, parse_list, parse_seeds, SweepPlan, WORKERS_ENV};
pub use error::CliError;
