//! CSV schemas for per-epoch records and metric rows.

use std::io::{Read, Write};

use particle_integrity::sim::{AlertRisk, EpochRecord, LimitMetrics, MetricsReport};
use particle_integrity::Vector3;

use crate::error::CliError;
use crate::format::{fmt_float, fmt_opt, parse_float, parse_opt, quantize};

pub const EPOCH_BASE_COLUMNS: [&str; 8] =
    ["time", "truth_x", "truth_y", "truth_z", "est_x", "est_y", "est_z", "err_norm"];

pub const METRICS_COLUMNS: [&str; 11] = [
    "mode",
    "bias",
    "faults",
    "seed",
    "alert_limit",
    "rmse",
    "p_fa",
    "p_mi",
    "failure_ratio",
    "failure_error",
    "bound_gap",
];

pub const SUMMARY_COLUMNS: [&str; 11] = [
    "mode",
    "bias",
    "faults",
    "alert_limit",
    "seeds",
    "rmse",
    "p_fa",
    "p_mi",
    "failure_ratio",
    "failure_error",
    "bound_gap",
];

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

fn quantize_vec(v: &Vector3<f64>) -> Vector3<f64> {
    v.map(quantize)
}

/// The record exactly as it reads back from `epochs.csv`. Columns the file
/// does not carry (empirical risk, diagnostics) are dropped.
pub fn quantize_record(rec: &EpochRecord) -> EpochRecord {
    EpochRecord {
        time: quantize(rec.time),
        truth: quantize_vec(&rec.truth),
        estimate: quantize_vec(&rec.estimate),
        risks: rec
            .risks
            .iter()
            .map(|r| AlertRisk {
                alert_limit: quantize(r.alert_limit),
                empirical_risk: f64::NAN,
                bound: quantize(r.bound),
                reference_risk: quantize(r.reference_risk),
            })
            .collect(),
        gamma: Vec::new(),
        alphas: Vec::new(),
        fault_mask_gnss: Vec::new(),
        fault_mask_camera: Vec::new(),
    }
}

pub fn epoch_header(alert_limits: &[f64]) -> Vec<String> {
    let mut header: Vec<String> = EPOCH_BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    for r in alert_limits {
        header.push(format!("bound_{}", fmt_float(*r)));
        header.push(format!("ref_risk_{}", fmt_float(*r)));
    }
    header
}

pub fn write_epochs<W: Write>(out: W, records: &[EpochRecord]) -> Result<(), CliError> {
    let limits: Vec<f64> = records.first().map(|r| r.risks.iter().map(|a| a.alert_limit).collect()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(epoch_header(&limits))?;
    for rec in records {
        let q = quantize_record(rec);
        let mut row = vec![fmt_float(q.time)];
        row.extend(q.truth.iter().map(|v| fmt_float(*v)));
        row.extend(q.estimate.iter().map(|v| fmt_float(*v)));
        row.push(fmt_float(q.error()));
        for risk in &q.risks {
            row.push(fmt_float(risk.bound));
            row.push(fmt_float(risk.reference_risk));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `epochs.csv`. The alert limits are recovered from the header.
pub fn read_epochs<R: Read>(input: R) -> Result<Vec<EpochRecord>, CliError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows = rdr.records();
    let header = match rows.next() {
        Some(h) => h.map_err(|e| invalid(e.to_string()))?,
        None => return Err(invalid("records file is empty")),
    };
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < EPOCH_BASE_COLUMNS.len() || cols[..EPOCH_BASE_COLUMNS.len()] != EPOCH_BASE_COLUMNS {
        return Err(invalid(format!("unexpected epochs header: {}", cols.join(","))));
    }
    let extra = &cols[EPOCH_BASE_COLUMNS.len()..];
    if extra.is_empty() || extra.len() % 2 != 0 {
        return Err(invalid("epochs header needs bound_/ref_risk_ column pairs"));
    }
    let mut limits = Vec::new();
    for pair in extra.chunks(2) {
        let r = pair[0].strip_prefix("bound_").ok_or_else(|| invalid(format!("expected bound_ column, got {}", pair[0])))?;
        let r2 =
            pair[1].strip_prefix("ref_risk_").ok_or_else(|| invalid(format!("expected ref_risk_ column, got {}", pair[1])))?;
        if r != r2 {
            return Err(invalid(format!("mismatched alert limit columns {} / {}", pair[0], pair[1])));
        }
        limits.push(parse_float(r).map_err(invalid)?);
    }

    let mut records = Vec::new();
    for (line, row) in rows.enumerate() {
        let row = row.map_err(|e| invalid(e.to_string()))?;
        if row.len() != cols.len() {
            return Err(invalid(format!("row {} has {} fields, expected {}", line + 2, row.len(), cols.len())));
        }
        let v = row.iter().map(parse_float).collect::<Result<Vec<f64>, _>>().map_err(invalid)?;
        let risks = limits
            .iter()
            .enumerate()
            .map(|(i, &alert_limit)| AlertRisk {
                alert_limit,
                empirical_risk: f64::NAN,
                bound: v[8 + 2 * i],
                reference_risk: v[9 + 2 * i],
            })
            .collect();
        records.push(EpochRecord {
            time: v[0],
            truth: Vector3::new(v[1], v[2], v[3]),
            estimate: Vector3::new(v[4], v[5], v[6]),
            risks,
            gamma: Vec::new(),
            alphas: Vec::new(),
            fault_mask_gnss: Vec::new(),
            fault_mask_camera: Vec::new(),
        });
    }
    if records.is_empty() {
        return Err(invalid("records file has no epochs"));
    }
    Ok(records)
}

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub mode: String,
    pub bias: f64,
    pub faults: usize,
    pub seed: u64,
    pub alert_limit: f64,
    pub rmse: f64,
    pub p_fa: f64,
    pub p_mi: f64,
    pub failure_ratio: f64,
    pub failure_error: Option<f64>,
    pub bound_gap: Option<f64>,
}

impl MetricsRow {
    pub fn new(mode: &str, bias: f64, faults: usize, seed: u64, rmse: f64, m: &LimitMetrics) -> Self {
        Self {
            mode: mode.to_string(),
            bias,
            faults,
            seed,
            alert_limit: m.alert_limit,
            rmse,
            p_fa: m.p_fa,
            p_mi: m.p_mi,
            failure_ratio: m.failure_ratio,
            failure_error: m.failure_error,
            bound_gap: m.bound_gap,
        }
    }

    pub fn from_report(mode: &str, bias: f64, faults: usize, seed: u64, report: &MetricsReport) -> Vec<Self> {
        report.per_limit.iter().map(|m| Self::new(mode, bias, faults, seed, report.rmse, m)).collect()
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.mode.clone(),
            fmt_float(self.bias),
            self.faults.to_string(),
            self.seed.to_string(),
            fmt_float(self.alert_limit),
            fmt_float(self.rmse),
            fmt_float(self.p_fa),
            fmt_float(self.p_mi),
            fmt_float(self.failure_ratio),
            fmt_opt(self.failure_error),
            fmt_opt(self.bound_gap),
        ]
    }
}

pub fn write_metrics<W: Write>(out: W, rows: &[MetricsRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_COLUMNS)?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics<R: Read>(input: R) -> Result<Vec<MetricsRow>, CliError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(|e| invalid(e.to_string()))?.clone();
    if header.iter().ne(METRICS_COLUMNS) {
        return Err(invalid(format!("unexpected metrics header: {}", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| invalid(e.to_string()))?;
        let f = |i: usize| parse_float(&row[i]).map_err(invalid);
        let o = |i: usize| parse_opt(&row[i]).map_err(invalid);
        rows.push(MetricsRow {
            mode: row[0].to_string(),
            bias: f(1)?,
            faults: row[2].parse().map_err(|_| invalid(format!("bad fault count {:?}", &row[2])))?,
            seed: row[3].parse().map_err(|_| invalid(format!("bad seed {:?}", &row[3])))?,
            alert_limit: f(4)?,
            rmse: f(5)?,
            p_fa: f(6)?,
            p_mi: f(7)?,
            failure_ratio: f(8)?,
            failure_error: o(9)?,
            bound_gap: o(10)?,
        });
    }
    Ok(rows)
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per-cell means over seeds, keyed by (mode, bias, faults, alert limit) in
/// first-seen order. Optional columns average only the seeds that define them.
pub fn write_summary<W: Write>(out: W, rows: &[MetricsRow]) -> Result<(), CliError> {
    let mut cells: Vec<(&str, f64, usize, f64)> = Vec::new();
    for r in rows {
        let key = (r.mode.as_str(), r.bias, r.faults, r.alert_limit);
        if !cells.contains(&key) {
            cells.push(key);
        }
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS)?;
    for (mode, bias, faults, limit) in cells {
        let members: Vec<&MetricsRow> = rows
            .iter()
            .filter(|r| r.mode == mode && r.bias == bias && r.faults == faults && r.alert_limit == limit)
            .collect();
        let m = |f: fn(&MetricsRow) -> f64| fmt_opt(mean_of(members.iter().map(|r| f(r))));
        let mo = |f: fn(&MetricsRow) -> Option<f64>| fmt_opt(mean_of(members.iter().filter_map(|r| f(r))));
        w.write_record([
            mode.to_string(),
            fmt_float(bias),
            faults.to_string(),
            fmt_float(limit),
            members.len().to_string(),
            m(|r| r.rmse),
            m(|r| r.p_fa),
            m(|r| r.p_mi),
            m(|r| r.failure_ratio),
            mo(|r| r.failure_error),
            mo(|r| r.bound_gap),
        ])?;
    }
    w.flush()?;
    Ok(())
}
