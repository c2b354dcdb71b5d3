//! Frame conventions and minimal parameterizations.
//!
//! A [`Pose`] stores the rotation from the global frame into the IMU frame and
//! the IMU position expressed in the global frame. All rotation perturbations
//! are applied on the right: `R <- R * Exp(dtheta)`.
//!
//! Lines are carried as 4-vectors `d * q` (closest-point form) and planes as
//! their closest point to the origin, `d * n`. Both live in plain Euclidean
//! space, so their retraction is vector addition.

use nalgebra::{
    DVector, Matrix3, Matrix3x4, Quaternion, Rotation3, RowVector4, UnitQuaternion, Vector3,
    Vector4,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3;

/// Lines closer than this to the origin have a singular closest-point form.
pub const EPS_LINE: f64 = 1e-6;
/// Planes closer than this to the origin have a singular closest-point form.
pub const EPS_PLANE: f64 = 1e-6;

/// A manifold-valued state with a fixed-size tangent space.
pub trait Manifold: Sized {
    const DIM: usize;

    /// Apply a tangent perturbation. Panics if `delta.len() != DIM`.
    fn boxplus(&self, delta: &[f64]) -> Self;

    /// Tangent vector `delta` such that `base.boxplus(delta) == self`.
    fn boxminus(&self, base: &Self) -> DVector<f64>;
}

fn check_dim(expected: usize, delta: &[f64]) {
    assert_eq!(
        delta.len(),
        expected,
        "tangent dimension mismatch: expected {expected}, got {}",
        delta.len()
    );
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    /// Rotation global -> IMU.
    pub rot: UnitQuaternion<f64>,
    /// IMU position in the global frame.
    pub pos: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rot: UnitQuaternion::identity(),
            pos: Vector3::zeros(),
        }
    }

    pub fn new(rot: UnitQuaternion<f64>, pos: Vector3<f64>) -> Self {
        Self {
            rot: so3::canonical(rot),
            pos,
        }
    }

    /// Rotation matrix global -> IMU.
    #[inline]
    pub fn rotation(&self) -> Matrix3<f64> {
        self.rot.to_rotation_matrix().into_inner()
    }

    /// Express a global point in the IMU frame.
    pub fn to_local(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rot * (p - self.pos)
    }

    pub fn to_global(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rot.inverse() * p + self.pos
    }

    /// The pose of the global frame seen from the IMU frame.
    pub fn inverse(&self) -> Pose {
        Pose::new(self.rot.inverse(), -(self.rot * self.pos))
    }
}

impl Manifold for Pose {
    const DIM: usize = 6;

    fn boxplus(&self, delta: &[f64]) -> Self {
        check_dim(Self::DIM, delta);
        let dtheta = Vector3::new(delta[0], delta[1], delta[2]);
        let dp = Vector3::new(delta[3], delta[4], delta[5]);
        let rot = if dtheta == Vector3::zeros() {
            self.rot
        } else {
            self.rot * so3::exp(&dtheta)
        };
        Pose::new(rot, self.pos + dp)
    }

    fn boxminus(&self, base: &Self) -> DVector<f64> {
        let dtheta = so3::log(&(base.rot.inverse() * self.rot));
        let dp = self.pos - base.pos;
        DVector::from_iterator(6, dtheta.iter().chain(dp.iter()).copied())
    }
}

/// Full inertial state. Tangent order: rotation, position, velocity, gyro
/// bias, accel bias.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImuState {
    pub pose: Pose,
    pub vel: Vector3<f64>,
    pub bg: Vector3<f64>,
    pub ba: Vector3<f64>,
}

impl Default for ImuState {
    fn default() -> Self {
        Self {
            pose: Pose::identity(),
            vel: Vector3::zeros(),
            bg: Vector3::zeros(),
            ba: Vector3::zeros(),
        }
    }
}

impl Manifold for ImuState {
    const DIM: usize = 15;

    fn boxplus(&self, delta: &[f64]) -> Self {
        check_dim(Self::DIM, delta);
        let v3 = |i: usize| Vector3::new(delta[i], delta[i + 1], delta[i + 2]);
        Self {
            pose: self.pose.boxplus(&delta[0..6]),
            vel: self.vel + v3(6),
            bg: self.bg + v3(9),
            ba: self.ba + v3(12),
        }
    }

    fn boxminus(&self, base: &Self) -> DVector<f64> {
        let mut out = DVector::zeros(15);
        out.rows_mut(0, 6)
            .copy_from(&self.pose.boxminus(&base.pose));
        out.fixed_rows_mut::<3>(6).copy_from(&(self.vel - base.vel));
        out.fixed_rows_mut::<3>(9).copy_from(&(self.bg - base.bg));
        out.fixed_rows_mut::<3>(12).copy_from(&(self.ba - base.ba));
        out
    }
}

/// Point feature in the global frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointFeature {
    pub p: Vector3<f64>,
}

impl PointFeature {
    pub fn new(p: Vector3<f64>) -> Self {
        Self { p }
    }
}

impl Manifold for PointFeature {
    const DIM: usize = 3;

    fn boxplus(&self, delta: &[f64]) -> Self {
        check_dim(Self::DIM, delta);
        Self {
            p: self.p + Vector3::from_column_slice(delta),
        }
    }

    fn boxminus(&self, base: &Self) -> DVector<f64> {
        DVector::from_column_slice((self.p - base.p).as_slice())
    }
}

/// Plücker coordinates: moment (normal) vector `n = p x v` and direction `v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlueckerLine {
    pub n: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl PlueckerLine {
    pub fn from_points(a: &Vector3<f64>, b: &Vector3<f64>) -> Self {
        let v = b - a;
        Self { n: a.cross(&v), v }
    }

    pub fn from_point_dir(p: &Vector3<f64>, v: &Vector3<f64>) -> Self {
        Self { n: p.cross(v), v: *v }
    }

    /// Scale so that the direction has unit norm.
    pub fn normalized(&self) -> Self {
        let s = self.v.norm();
        Self {
            n: self.n / s,
            v: self.v / s,
        }
    }

    pub fn to_vector(&self) -> nalgebra::Vector6<f64> {
        nalgebra::Vector6::new(
            self.n.x, self.n.y, self.n.z, self.v.x, self.v.y, self.v.z,
        )
    }

    /// Distance of the line from the origin.
    pub fn distance(&self) -> f64 {
        self.n.norm() / self.v.norm()
    }

    /// Point of the line closest to the origin.
    pub fn closest_point(&self) -> Vector3<f64> {
        self.v.cross(&self.n) / self.v.norm_squared()
    }

    /// Distance from `p` to the line.
    pub fn distance_to_point(&self, p: &Vector3<f64>) -> f64 {
        let vn = self.v.norm();
        (p.cross(&self.v) - self.n).norm() / vn
    }
}

/// Closest-point line parameterization `x = d * q`, quaternion in
/// `(w, x, y, z)` order. The rotation `R(q)` has columns
/// `(n/|n|, v/|v|, n/|n| x v/|v|)` and `d = |n| / |v|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineCp {
    pub x: Vector4<f64>,
}

/// Unit normal, unit direction and distance of a [`LineCp`] together with
/// their derivatives w.r.t. the 4-vector state.
#[derive(Clone, Copy, Debug)]
pub struct LineDerivatives {
    pub nbar: Vector3<f64>,
    pub vbar: Vector3<f64>,
    pub d: f64,
    pub j_nbar: Matrix3x4<f64>,
    pub j_vbar: Matrix3x4<f64>,
    pub j_d: RowVector4<f64>,
}

impl LineDerivatives {
    /// Closest point `d * (vbar x nbar)`.
    pub fn closest_point(&self) -> Vector3<f64> {
        self.d * self.vbar.cross(&self.nbar)
    }

    pub fn closest_point_jacobian(&self) -> Matrix3x4<f64> {
        let c_dir = self.vbar.cross(&self.nbar);
        c_dir * self.j_d
            + self.d * (so3::skew(&self.vbar) * self.j_nbar - so3::skew(&self.nbar) * self.j_vbar)
    }

    /// `nbar x vbar` and its Jacobian.
    pub fn binormal(&self) -> (Vector3<f64>, Matrix3x4<f64>) {
        let b = self.nbar.cross(&self.vbar);
        let j = so3::skew(&self.nbar) * self.j_vbar - so3::skew(&self.vbar) * self.j_nbar;
        (b, j)
    }

    /// Plücker moment `d * nbar` and its Jacobian.
    pub fn moment(&self) -> (Vector3<f64>, Matrix3x4<f64>) {
        (self.d * self.nbar, self.nbar * self.j_d + self.d * self.j_nbar)
    }
}

impl LineCp {
    pub fn from_parts(q: UnitQuaternion<f64>, d: f64) -> Self {
        let q = so3::canonical(q);
        Self {
            x: Vector4::new(q.w, q.i, q.j, q.k) * d,
        }
    }

    pub fn distance(&self) -> f64 {
        self.x.norm()
    }

    /// Identity for the zero vector, where the orientation is undefined.
    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        if self.x == Vector4::zeros() {
            return UnitQuaternion::identity();
        }
        UnitQuaternion::from_quaternion(Quaternion::new(self.x[0], self.x[1], self.x[2], self.x[3]))
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.quaternion().to_rotation_matrix().into_inner()
    }

    pub fn is_degenerate(&self) -> bool {
        self.distance() < EPS_LINE
    }

    pub fn closest_point(&self) -> Vector3<f64> {
        let r = self.rotation();
        let nbar: Vector3<f64> = r.column(0).into();
        let vbar: Vector3<f64> = r.column(1).into();
        self.distance() * vbar.cross(&nbar)
    }

    pub fn derivatives(&self) -> LineDerivatives {
        let d = self.x.norm();
        let q = self.x / d;
        let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
        let nbar = Vector3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y + w * z),
            2.0 * (x * z - w * y),
        );
        let vbar = Vector3::new(
            2.0 * (x * y - w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z + w * x),
        );
        // d(column)/d(w, x, y, z) for a unit quaternion
        #[rustfmt::skip]
        let dn_dq = Matrix3x4::new(
            0.0,      0.0,      -4.0 * y, -4.0 * z,
            2.0 * z,  2.0 * y,  2.0 * x,  2.0 * w,
            -2.0 * y, 2.0 * z,  -2.0 * w, 2.0 * x,
        );
        #[rustfmt::skip]
        let dv_dq = Matrix3x4::new(
            -2.0 * z, 2.0 * y,  2.0 * x, -2.0 * w,
            0.0,      -4.0 * x, 0.0,     -4.0 * z,
            2.0 * x,  2.0 * w,  2.0 * z, 2.0 * y,
        );
        let dq_dx = (nalgebra::Matrix4::identity() - q * q.transpose()) / d;
        LineDerivatives {
            nbar,
            vbar,
            d,
            j_nbar: dn_dq * dq_dx,
            j_vbar: dv_dq * dq_dx,
            j_d: q.transpose(),
        }
    }
}

impl Manifold for LineCp {
    const DIM: usize = 4;

    fn boxplus(&self, delta: &[f64]) -> Self {
        check_dim(Self::DIM, delta);
        Self {
            x: self.x + Vector4::from_column_slice(delta),
        }
    }

    fn boxminus(&self, base: &Self) -> DVector<f64> {
        DVector::from_column_slice((self.x - base.x).as_slice())
    }
}

/// Convert Plücker coordinates into the closest-point form.
pub fn pluecker_to_cp(l: &PlueckerLine) -> Result<LineCp> {
    let vn = l.v.norm();
    if vn < EPS_LINE {
        return Err(Error::DegenerateLine(vn));
    }
    let d = l.n.norm() / vn;
    if l.n.norm() < EPS_LINE || d < EPS_LINE {
        return Err(Error::DegenerateLine(d));
    }
    let nbar = l.n / l.n.norm();
    let vbar = l.v / vn;
    // re-orthogonalize against round-off in n . v
    let vbar = (vbar - nbar * nbar.dot(&vbar)).normalize();
    let m = Matrix3::from_columns(&[nbar, vbar, nbar.cross(&vbar)]);
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m));
    Ok(LineCp::from_parts(q, d))
}

/// Plücker coordinates with unit direction.
pub fn cp_to_pluecker(cp: &LineCp) -> PlueckerLine {
    let d = cp.distance();
    let r = cp.rotation();
    PlueckerLine {
        n: d * Vector3::from(r.column(0)),
        v: r.column(1).into(),
    }
}

/// Express a global line in the IMU frame.
pub fn transform_line(pose: &Pose, l: &PlueckerLine) -> PlueckerLine {
    PlueckerLine {
        n: pose.rot * (l.n - pose.pos.cross(&l.v)),
        v: pose.rot * l.v,
    }
}

/// Plane `{x : n . x = d}` with unit normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub n: Vector3<f64>,
    pub d: f64,
}

impl Plane {
    pub fn new(n: Vector3<f64>, d: f64) -> Self {
        let s = n.norm();
        Self { n: n / s, d: d / s }
    }

    /// Signed distance of `p` along the normal.
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.n.dot(p) - self.d
    }

    pub fn closest_point(&self) -> Vector3<f64> {
        self.d * self.n
    }
}

/// Express a global plane in the IMU frame.
pub fn transform_plane(pose: &Pose, plane: &Plane) -> Plane {
    Plane {
        n: pose.rot * plane.n,
        d: plane.d - pose.pos.dot(&plane.n),
    }
}

/// Closest point of a plane to the origin, `d * n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneCp {
    pub cp: Vector3<f64>,
}

impl PlaneCp {
    pub fn from_plane(plane: &Plane) -> Result<Self> {
        if plane.d.abs() < EPS_PLANE {
            return Err(Error::DegeneratePlane(plane.d.abs()));
        }
        Ok(Self {
            cp: plane.closest_point(),
        })
    }

    pub fn distance(&self) -> f64 {
        self.cp.norm()
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.cp / self.cp.norm()
    }

    /// Plane with unit normal pointing from the origin towards the plane.
    pub fn to_plane(&self) -> Plane {
        Plane {
            n: self.normal(),
            d: self.distance(),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.distance() < EPS_PLANE
    }

    /// Derivative of the unit normal w.r.t. the closest point.
    pub fn normal_jacobian(&self) -> Matrix3<f64> {
        let d = self.distance();
        let n = self.cp / d;
        (Matrix3::identity() - n * n.transpose()) / d
    }
}

impl Manifold for PlaneCp {
    const DIM: usize = 3;

    fn boxplus(&self, delta: &[f64]) -> Self {
        check_dim(Self::DIM, delta);
        Self {
            cp: self.cp + Vector3::from_column_slice(delta),
        }
    }

    fn boxminus(&self, base: &Self) -> DVector<f64> {
        DVector::from_column_slice((self.cp - base.cp).as_slice())
    }
}
