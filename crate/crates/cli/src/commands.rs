//! The `run`, `sweep` and `metrics` commands.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use log::{info, warn};
use particle_integrity::config::ScenarioConfig;
use particle_integrity::sim::{compute_metrics, run_scenario, EpochRecord};
use rayon::prelude::*;

use crate::error::CliError;
use crate::format::{fmt_float, fmt_opt};
use crate::manifest::RunManifest;
use crate::records::{quantize_record, read_epochs, write_epochs, write_metrics, write_summary, MetricsRow};

/// Caps the number of sweep workers. Unset means one per available core.
pub const WORKERS_ENV: &str = "PFINT_WORKERS";

pub const EPOCHS_FILE: &str = "epochs.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

pub const MODE_FUSED: &str = "fused";
pub const MODE_GNSS_ONLY: &str = "gnss_only";

fn mode_name(cfg: &ScenarioConfig) -> &'static str {
    if cfg.scenario.fusion {
        MODE_FUSED
    } else {
        MODE_GNSS_ONLY
    }
}

/// Parses a comma-separated list of numbers.
pub fn parse_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::Invalid(format!("not a number: {s:?}"))))
        .collect()
}

/// Parses seeds as a comma-separated mix of single values and inclusive
/// ranges: `0..19`, `3,5,8`, `0..4,10`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = |s: &str| CliError::Invalid(format!("bad seed spec: {s:?}"));
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim) {
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: u64 = lo.parse().map_err(|_| bad(part))?;
            let hi: u64 = hi.trim_start_matches('=').parse().map_err(|_| bad(part))?;
            if hi < lo {
                return Err(bad(part));
            }
            seeds.extend(lo..=hi);
        } else {
            seeds.push(part.parse().map_err(|_| bad(part))?);
        }
    }
    Ok(seeds)
}

fn run_and_measure(cfg: &ScenarioConfig) -> Result<(Vec<EpochRecord>, Vec<MetricsRow>), CliError> {
    let records = run_scenario(cfg)?;
    // Metrics come from the records as written, so recomputing them from
    // epochs.csv reproduces metrics.csv exactly.
    let quantized: Vec<EpochRecord> = records.iter().map(quantize_record).collect();
    let report = compute_metrics(&quantized, cfg.integrity.risk_threshold)?;
    let rows = MetricsRow::from_report(
        mode_name(cfg),
        cfg.gnss.bias,
        cfg.gnss.num_faults,
        cfg.scenario.seed,
        &report,
    );
    Ok((records, rows))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<(), CliError>) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_run_outputs(dir: &Path, records: &[EpochRecord], rows: &[MetricsRow]) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    write_file(&dir.join(EPOCHS_FILE), |w| write_epochs(w, records))?;
    write_file(&dir.join(METRICS_FILE), |w| write_metrics(w, rows))
}

/// `run <config> --out <dir> [--seed N]`.
pub fn cmd_run(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<Vec<MetricsRow>, CliError> {
    let mut cfg = ScenarioConfig::from_path(config_path)?;
    if let Some(seed) = seed {
        cfg.scenario.seed = seed;
    }
    let (records, rows) = run_and_measure(&cfg)?;
    write_run_outputs(out_dir, &records, &rows)?;
    let files = [EPOCHS_FILE.to_string(), METRICS_FILE.to_string()];
    RunManifest::build(cfg.to_toml_string(), vec![cfg.scenario.seed], out_dir, &files)?.write(out_dir)?;
    info!("wrote {} epochs to {}", records.len(), out_dir.display());
    Ok(rows)
}

/// Grid of a sweep. Every (bias, faults, seed) cell runs in both modes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub biases: Vec<f64>,
    pub faults: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl SweepPlan {
    /// Drops repeated seeds (keeping first occurrences) and rejects empty lists.
    pub fn normalized(mut self) -> Result<Self, CliError> {
        if self.biases.is_empty() || self.faults.is_empty() || self.seeds.is_empty() {
            return Err(CliError::Invalid("bias, fault and seed lists must be nonempty".into()));
        }
        let mut unique = Vec::with_capacity(self.seeds.len());
        for s in &self.seeds {
            if !unique.contains(s) {
                unique.push(*s);
            }
        }
        if unique.len() != self.seeds.len() {
            warn!("dropped {} duplicate seed(s)", self.seeds.len() - unique.len());
            self.seeds = unique;
        }
        Ok(self)
    }

    fn cells(&self, base: &ScenarioConfig) -> Vec<ScenarioConfig> {
        let mut out = Vec::new();
        for &bias in &self.biases {
            for &faults in &self.faults {
                for &seed in &self.seeds {
                    for fusion in [true, false] {
                        let mut cfg = base.clone();
                        cfg.gnss.bias = bias;
                        cfg.gnss.num_faults = faults;
                        cfg.scenario.seed = seed;
                        cfg.scenario.fusion = fusion;
                        out.push(cfg);
                    }
                }
            }
        }
        out
    }
}

fn cell_dir(cfg: &ScenarioConfig) -> String {
    format!(
        "cells/{}_bias{}_faults{}_seed{}",
        mode_name(cfg),
        fmt_float(cfg.gnss.bias),
        cfg.gnss.num_faults,
        cfg.scenario.seed
    )
}

/// Worker count from the environment, if set.
pub fn worker_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Invalid(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

/// `sweep <config> --bias .. --faults .. --seeds .. --out <dir>`.
///
/// Each cell writes its own directory; the merged `metrics.csv` and the
/// per-cell means in `summary.csv` are written afterwards by one thread.
pub fn cmd_sweep(config_path: &Path, plan: SweepPlan, out_dir: &Path) -> Result<Vec<MetricsRow>, CliError> {
    let base = ScenarioConfig::from_path(config_path)?;
    let plan = plan.normalized()?;
    let cells = plan.cells(&base);
    for cfg in &cells {
        cfg.validate()?;
    }

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_cap()? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Runtime(e.to_string()))?;

    let per_cell: Vec<Result<(String, Vec<MetricsRow>), CliError>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cfg| {
                let dir = cell_dir(cfg);
                let (records, rows) = run_and_measure(cfg)
                    .map_err(|e| CliError::Runtime(format!("{dir}: {e}")))?;
                write_run_outputs(&out_dir.join(&dir), &records, &rows)?;
                Ok((dir, rows))
            })
            .collect()
    });

    let mut files = Vec::new();
    let mut rows = Vec::new();
    for cell in per_cell {
        let (dir, cell_rows) = cell?;
        files.push(format!("{dir}/{EPOCHS_FILE}"));
        files.push(format!("{dir}/{METRICS_FILE}"));
        rows.extend(cell_rows);
    }
    write_file(&out_dir.join(METRICS_FILE), |w| write_metrics(w, &rows))?;
    write_file(&out_dir.join(SUMMARY_FILE), |w| write_summary(w, &rows))?;
    files.push(METRICS_FILE.to_string());
    files.push(SUMMARY_FILE.to_string());
    RunManifest::build(base.to_toml_string(), plan.seeds.clone(), out_dir, &files)?.write(out_dir)?;
    info!("sweep of {} runs written to {}", cells.len(), out_dir.display());
    Ok(rows)
}

pub const METRICS_REPORT_COLUMNS: &str = "alert_limit,rmse,p_fa,p_mi,failure_ratio,failure_error,bound_gap";

/// `metrics <epochs.csv> --alert-limit R --threshold T`: recomputes the
/// metrics of one alert limit and prints them as a CSV header plus one row.
pub fn cmd_metrics(
    records_path: &Path,
    alert_limit: f64,
    threshold: f64,
    out: &mut impl Write,
) -> Result<MetricsRow, CliError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::Invalid(format!("threshold must lie in [0, 1], got {threshold}")));
    }
    let file = File::open(records_path)
        .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", records_path.display())))?;
    let records = read_epochs(BufReader::new(file))?;
    let report = compute_metrics(&records, threshold).map_err(|e| CliError::Invalid(e.to_string()))?;
    let limit = report
        .per_limit
        .iter()
        .find(|m| m.alert_limit == alert_limit)
        .ok_or_else(|| CliError::Invalid(format!("alert limit {alert_limit} not present in {}", records_path.display())))?;
    writeln!(out, "{METRICS_REPORT_COLUMNS}")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        fmt_float(limit.alert_limit),
        fmt_float(report.rmse),
        fmt_float(limit.p_fa),
        fmt_float(limit.p_mi),
        fmt_float(limit.failure_ratio),
        fmt_opt(limit.failure_error),
        fmt_opt(limit.bound_gap)
    )?;
    Ok(MetricsRow::new("", f64::NAN, 0, 0, report.rmse, limit))
}
