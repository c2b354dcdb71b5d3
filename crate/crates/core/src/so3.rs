//! SO(3) helpers: hat operator, exponential/logarithm maps and right Jacobians.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

const SMALL_ANGLE: f64 = 1e-8;

#[inline]
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[inline]
pub fn exp(phi: &Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_scaled_axis(*phi)
}

/// Rotation vector of `q`, with angle in `[0, pi]`.
pub fn log(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let q = canonical(*q);
    let w = q.w.clamp(-1.0, 1.0);
    let im = q.imag();
    let s = im.norm();
    if s < SMALL_ANGLE {
        // atan2(s, w) / s -> 1 / w for small s
        return im * (2.0 / w);
    }
    let angle = 2.0 * s.atan2(w);
    im * (angle / s)
}

/// Flip the sign so that the scalar part is non-negative.
#[inline]
pub fn canonical(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    if q.w < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

/// Right Jacobian of SO(3): `Exp(phi + d) ~ Exp(phi) Exp(Jr(phi) d)`.
pub fn right_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = phi.norm_squared();
    let k = skew(phi);
    if theta2 < SMALL_ANGLE * SMALL_ANGLE {
        return Matrix3::identity() - 0.5 * k + (k * k) / 6.0;
    }
    let theta = theta2.sqrt();
    Matrix3::identity() - (1.0 - theta.cos()) / theta2 * k
        + (theta - theta.sin()) / (theta2 * theta) * (k * k)
}

pub fn right_jacobian_inv(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = phi.norm_squared();
    let k = skew(phi);
    if theta2 < SMALL_ANGLE * SMALL_ANGLE {
        return Matrix3::identity() + 0.5 * k + (k * k) / 12.0;
    }
    let theta = theta2.sqrt();
    let coeff = 1.0 / theta2 - (1.0 + theta.cos()) / (2.0 * theta * theta.sin());
    Matrix3::identity() + 0.5 * k + coeff * (k * k)
}

/// Rotation angle of `q` in radians.
pub fn angle(q: &UnitQuaternion<f64>) -> f64 {
    log(q).norm()
}
