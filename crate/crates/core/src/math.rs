//! Small numeric helpers shared across modules.

use nalgebra::{Matrix4, Vector3};

/// Numerically stable `ln Σ exp(xᵢ)`. Returns `-inf` for an empty slice or
/// when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Geometric dilution of precision for a receiver at `receiver` observing
/// `sats`, using the usual 4-column geometry matrix (unit line-of-sight plus a
/// clock column). Returns `None` when the normal matrix is singular.
pub fn gdop(receiver: &Vector3<f64>, sats: &[Vector3<f64>]) -> Option<f64> {
    if sats.len() < 4 {
        return None;
    }
    let mut normal = Matrix4::<f64>::zeros();
    for sat in sats {
        let los = sat - receiver;
        let range = los.norm();
        if range == 0.0 {
            return None;
        }
        let u = los / range;
        let row = nalgebra::RowVector4::new(-u.x, -u.y, -u.z, 1.0);
        normal += row.transpose() * row;
    }
    // A rank-deficient geometry still inverts numerically with a huge
    // condition number; treat that as singular.
    let eig = normal.symmetric_eigenvalues();
    let (min, max) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    if !(min > max * 1e-10) {
        return None;
    }
    let inv = normal.try_inverse()?;
    let tr = inv.trace();
    (tr.is_finite() && tr > 0.0).then(|| tr.sqrt())
}
