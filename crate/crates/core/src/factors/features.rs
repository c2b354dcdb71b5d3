use nalgebra::{Matrix3, Matrix3x4, Matrix6, Matrix6x4, SMatrix, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{LineCp, PlaneCp, PointFeature, Pose, EPS_LINE, EPS_PLANE};
use crate::so3::skew;

/// Point observed in the IMU frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointMeasurement {
    pub z: Vector3<f64>,
    pub sigma: Matrix3<f64>,
}

/// Plücker coordinates `(n, v)` observed in the IMU frame, scaled to unit `v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineMeasurement {
    pub z: Vector6<f64>,
    pub sigma: Matrix6<f64>,
}

/// Closest point of a plane observed in the IMU frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneMeasurement {
    pub z: Vector3<f64>,
    pub sigma: Matrix3<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct PointEvaluation {
    pub residual: Vector3<f64>,
    /// Columns: rotation perturbation then position.
    pub j_pose: SMatrix<f64, 3, 6>,
    pub j_point: Matrix3<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct LineEvaluation {
    pub residual: Vector6<f64>,
    pub j_pose: Matrix6<f64>,
    pub j_line: Matrix6x4<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct PlaneEvaluation {
    pub residual: Vector3<f64>,
    pub j_pose: SMatrix<f64, 3, 6>,
    pub j_plane: Matrix3<f64>,
}

/// `r = R (p_point - p_imu) - z`.
pub fn point_factor(pose: &Pose, point: &PointFeature, m: &PointMeasurement) -> PointEvaluation {
    let r = pose.rotation();
    let diff = point.p - pose.pos;
    let mut j_pose = SMatrix::<f64, 3, 6>::zeros();
    j_pose.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-r * skew(&diff)));
    j_pose.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-r));
    PointEvaluation {
        residual: r * diff - m.z,
        j_pose,
        j_point: r,
    }
}

/// Local Plücker prediction minus measurement; both carry a unit direction.
pub fn line_factor(pose: &Pose, line: &LineCp, m: &LineMeasurement) -> Result<LineEvaluation> {
    if line.is_degenerate() {
        return Err(Error::DegenerateLine(line.distance()));
    }
    let ld = line.derivatives();
    let r = pose.rotation();
    let (n, j_n) = ld.moment();
    let v = ld.vbar;
    let u = n - pose.pos.cross(&v);
    let n_local = r * u;
    if n_local.norm() < EPS_LINE {
        return Err(Error::DegenerateLine(n_local.norm()));
    }
    let v_local = r * v;
    let pred = Vector6::new(
        n_local.x, n_local.y, n_local.z, v_local.x, v_local.y, v_local.z,
    );

    let mut j_pose = Matrix6::zeros();
    j_pose.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-r * skew(&u)));
    j_pose.fixed_view_mut::<3, 3>(0, 3).copy_from(&(r * skew(&v)));
    j_pose.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-r * skew(&v)));

    let mut j_line = Matrix6x4::zeros();
    let j_u: Matrix3x4<f64> = j_n - skew(&pose.pos) * ld.j_vbar;
    j_line.fixed_view_mut::<3, 4>(0, 0).copy_from(&(r * j_u));
    j_line.fixed_view_mut::<3, 4>(3, 0).copy_from(&(r * ld.j_vbar));

    Ok(LineEvaluation {
        residual: pred - m.z,
        j_pose,
        j_line,
    })
}

/// `r = d_I n_I - z` with the plane moved into the IMU frame.
pub fn plane_factor(pose: &Pose, plane: &PlaneCp, m: &PlaneMeasurement) -> Result<PlaneEvaluation> {
    if plane.is_degenerate() {
        return Err(Error::DegeneratePlane(plane.distance()));
    }
    let r = pose.rotation();
    let n = plane.normal();
    let np = n.dot(&pose.pos);
    // x - n n^T p, the local closest point before rotation
    let w = plane.cp - n * np;
    if w.norm() < EPS_PLANE {
        return Err(Error::DegeneratePlane(w.norm()));
    }
    let mut j_pose = SMatrix::<f64, 3, 6>::zeros();
    j_pose.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-r * skew(&w)));
    j_pose
        .fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&(-r * n * n.transpose()));
    let dn = plane.normal_jacobian();
    let j_inner = Matrix3::identity() - (np * Matrix3::identity() + n * pose.pos.transpose()) * dn;
    Ok(PlaneEvaluation {
        residual: r * w - m.z,
        j_pose,
        j_plane: r * j_inner,
    })
}
