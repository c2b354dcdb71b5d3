//! Trajectory error metrics.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use spins_core::geometry::Pose;

use crate::error::{Result, SimError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rmse {
    /// Metres.
    pub trans: f64,
    /// Degrees.
    pub rot: f64,
}

/// RMSE of positions and of rotation-error angles over matched timestamps,
/// without alignment.
pub fn evaluate_rmse(est: &[(f64, Pose)], truth: &[(f64, Pose)]) -> Result<Rmse> {
    evaluate_rmse_with(est, truth, false)
}

/// As [`evaluate_rmse`], optionally after the rigid alignment of the estimate
/// onto the ground truth that minimizes the position error.
pub fn evaluate_rmse_with(est: &[(f64, Pose)], truth: &[(f64, Pose)], align: bool) -> Result<Rmse> {
    if est.len() != truth.len() || est.is_empty() {
        return Err(SimError::InvalidScenario(format!(
            "trajectory lengths differ or are empty: {} vs {}",
            est.len(),
            truth.len()
        )));
    }
    for ((te, _), (tt, _)) in est.iter().zip(truth) {
        if (te - tt).abs() > 1e-9 {
            return Err(SimError::InvalidScenario(format!("timestamp mismatch: {te} vs {tt}")));
        }
    }
    let (r, t) = if align {
        rigid_alignment(est, truth)
    } else {
        (UnitQuaternion::identity(), Vector3::zeros())
    };
    let n = est.len() as f64;
    let mut se = 0.0;
    let mut sr = 0.0;
    for ((_, e), (_, g)) in est.iter().zip(truth) {
        let p = r * e.pos + t;
        // estimate rotation is global -> body; aligning the global frame
        // composes the inverse on the right
        let q = e.rot * r.inverse();
        se += (p - g.pos).norm_squared();
        let d = q * g.rot.inverse();
        // atan2 form stays accurate for tiny angles
        sr += (2.0 * d.imag().norm().atan2(d.w.abs())).powi(2);
    }
    Ok(Rmse {
        trans: (se / n).sqrt(),
        rot: (sr / n).sqrt().to_degrees(),
    })
}

/// Kabsch: rotation and translation mapping estimated onto true positions.
fn rigid_alignment(est: &[(f64, Pose)], truth: &[(f64, Pose)]) -> (UnitQuaternion<f64>, Vector3<f64>) {
    let n = est.len() as f64;
    let ce = est.iter().map(|(_, p)| p.pos).sum::<Vector3<f64>>() / n;
    let ct = truth.iter().map(|(_, p)| p.pos).sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for ((_, e), (_, g)) in est.iter().zip(truth) {
        cov += (g.pos - ct) * (e.pos - ce).transpose();
    }
    let svd = cov.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut s = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let rot = u * s * vt;
    let r = UnitQuaternion::from_matrix(&rot);
    (r, ct - r * ce)
}
