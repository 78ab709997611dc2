//! Trajectory-level accuracy and integrity metrics.
//!
//! Per alert limit `r`, an epoch has a *fault* when the position error exceeds
//! `r`, and the system *declares insufficient integrity* when the bound
//! exceeds the risk threshold. `p_fa` and `p_mi` are fractions of all epochs.
//! A *failure* is an epoch whose bound is below the reference risk.

use crate::error::{Error, Result};
use crate::sim::scenario::EpochRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitMetrics {
    pub alert_limit: f64,
    pub p_fa: f64,
    pub p_mi: f64,
    pub failure_ratio: f64,
    /// Mean position error over failure epochs; `None` without failures.
    pub failure_error: Option<f64>,
    /// Mean `bound − reference_risk` over non-failure epochs; `None` if every
    /// epoch failed.
    pub bound_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rmse: f64,
    pub per_limit: Vec<LimitMetrics>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn compute_metrics(records: &[EpochRecord], risk_threshold: f64) -> Result<MetricsReport> {
    let first = records.first().ok_or_else(|| Error::InvalidInput("no epoch records".into()))?;
    let n = records.len() as f64;
    let rmse = (records.iter().map(|r| r.error().powi(2)).sum::<f64>() / n).sqrt();

    let limits: Vec<f64> = first.risks.iter().map(|r| r.alert_limit).collect();
    let per_limit = limits
        .iter()
        .map(|&limit| {
            let mut false_alarms = 0usize;
            let mut missed = 0usize;
            let mut failure_errors = Vec::new();
            let mut gaps = Vec::new();
            for rec in records {
                let risk = rec.risk(limit).ok_or_else(|| {
                    Error::InvalidInput(format!("epoch at t={} lacks alert limit {limit}", rec.time))
                })?;
                let error = rec.error();
                let fault = error > limit;
                let insufficient = risk.bound > risk_threshold;
                false_alarms += usize::from(insufficient && !fault);
                missed += usize::from(!insufficient && fault);
                if risk.bound < risk.reference_risk {
                    failure_errors.push(error);
                } else {
                    gaps.push(risk.bound - risk.reference_risk);
                }
            }
            Ok(LimitMetrics {
                alert_limit: limit,
                p_fa: false_alarms as f64 / n,
                p_mi: missed as f64 / n,
                failure_ratio: failure_errors.len() as f64 / n,
                failure_error: mean(&failure_errors),
                bound_gap: mean(&gaps),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport { rmse, per_limit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::AlertRisk;
    use nalgebra::Vector3;

    fn rec(err: f64, bound: f64, reference: f64) -> EpochRecord {
        EpochRecord {
            time: 0.0,
            truth: Vector3::zeros(),
            estimate: Vector3::new(err, 0.0, 0.0),
            risks: vec![AlertRisk { alert_limit: 8.0, empirical_risk: 0.0, bound, reference_risk: reference }],
            gamma: vec![],
            alphas: vec![],
            fault_mask_gnss: vec![],
            fault_mask_camera: vec![],
        }
    }

    #[test]
    fn always_covering_bound() {
        let recs = vec![rec(1.0, 1.0, 0.0); 5];
        let m = compute_metrics(&recs, 0.1).unwrap();
        let l = m.per_limit[0];
        assert_eq!(l.failure_ratio, 0.0);
        assert_eq!(l.bound_gap, Some(1.0));
        assert_eq!(l.failure_error, None);
        assert_eq!(m.rmse, 1.0);
    }

    #[test]
    fn never_covering_bound() {
        let recs = vec![rec(1.0, 0.0, 1.0); 5];
        let l = compute_metrics(&recs, 0.1).unwrap().per_limit[0];
        assert_eq!(l.failure_ratio, 1.0);
        assert_eq!(l.bound_gap, None);
    }

    #[test]
    fn hand_built_single_failure() {
        let recs = vec![rec(1.0, 0.5, 0.1), rec(2.0, 0.3, 0.3), rec(9.5, 0.01, 0.2), rec(3.0, 0.2, 0.0)];
        let m = compute_metrics(&recs, 0.1).unwrap();
        let l = m.per_limit[0];
        assert_eq!(l.failure_ratio, 0.25);
        assert_eq!(l.failure_error, Some(9.5));
        assert!((l.bound_gap.unwrap() - (0.4 + 0.0 + 0.2) / 3.0).abs() < 1e-15);
        // Epoch 3 has error 9.5 > 8 and bound 0.01 <= 0.1: missed identification.
        assert_eq!(l.p_mi, 0.25);
        // Epochs 1, 2, 4 have no fault but bound > 0.1: false alarms.
        assert_eq!(l.p_fa, 0.75);
        let expected_rmse = ((1.0 + 4.0 + 90.25 + 9.0) / 4.0f64).sqrt();
        assert!((m.rmse - expected_rmse).abs() < 1e-12);
    }

    #[test]
    fn threshold_one_never_alarms() {
        let recs = vec![rec(1.0, 1.0, 0.0), rec(20.0, 0.7, 0.9)];
        assert_eq!(compute_metrics(&recs, 1.0).unwrap().per_limit[0].p_fa, 0.0);
    }

    #[test]
    fn empty_records_rejected() {
        assert!(compute_metrics(&[], 0.1).is_err());
    }
}
