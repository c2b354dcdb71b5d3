//! Pairwise distance / cosine measurements between features and their
//! Jacobians w.r.t. the closest-point states.

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{LineCp, PlaneCp, PointFeature};
use crate::so3::skew;

/// Added under the square root of distances so that the norm stays
/// differentiable when the distance vanishes.
pub const NORM_SMOOTHING: f64 = 1e-18;

/// Cosine margin deciding whether two directions count as parallel.
pub const TAU_PARALLEL: f64 = 1e-3;

const COINCIDENT: f64 = 1e-9;

/// Scalar measurement with row Jacobians w.r.t. both arguments.
#[derive(Clone, Copy, Debug)]
pub struct ScalarMeasure<const A: usize, const B: usize> {
    pub value: f64,
    pub j_a: SMatrix<f64, 1, A>,
    pub j_b: SMatrix<f64, 1, B>,
}

/// Cosine between two directions plus, when the pair is in the parallel
/// configuration, their separation.
#[derive(Clone, Copy, Debug)]
pub struct AngleDistance<const A: usize, const B: usize> {
    pub cosine: ScalarMeasure<A, B>,
    pub distance: Option<ScalarMeasure<A, B>>,
}

fn smooth_norm(v: &Vector3<f64>) -> f64 {
    (v.norm_squared() + NORM_SMOOTHING).sqrt()
}

/// Distance between two points.
pub fn point_point(a: &PointFeature, b: &PointFeature) -> Result<ScalarMeasure<3, 3>> {
    let diff = b.p - a.p;
    if diff.norm() <= COINCIDENT {
        return Err(Error::DegeneratePair("coincident points"));
    }
    let d = diff.norm();
    let j = diff.transpose() / d;
    Ok(ScalarMeasure {
        value: d,
        j_a: -j,
        j_b: j,
    })
}

/// 2-D displacement of a point from a line, `[n^T p; (n x v)^T p + d]`.
pub fn point_line_displacement(p: &PointFeature, line: &LineCp) -> (nalgebra::Vector2<f64>, SMatrix<f64, 2, 3>, SMatrix<f64, 2, 4>) {
    let ld = line.derivatives();
    let (b, j_b) = ld.binormal();
    let x = nalgebra::Vector2::new(ld.nbar.dot(&p.p), b.dot(&p.p) + ld.d);
    let mut j_p = SMatrix::<f64, 2, 3>::zeros();
    j_p.set_row(0, &ld.nbar.transpose());
    j_p.set_row(1, &b.transpose());
    let mut j_l = SMatrix::<f64, 2, 4>::zeros();
    j_l.set_row(0, &(p.p.transpose() * ld.j_nbar));
    j_l.set_row(1, &(p.p.transpose() * j_b + ld.j_d));
    (x, j_p, j_l)
}

/// Distance from a point to an infinite line (smoothed at zero).
pub fn point_line(p: &PointFeature, line: &LineCp) -> Result<ScalarMeasure<3, 4>> {
    if line.is_degenerate() {
        return Err(Error::DegenerateLine(line.distance()));
    }
    let (x, j_p, j_l) = point_line_displacement(p, line);
    let d = (x.norm_squared() + NORM_SMOOTHING).sqrt();
    let g = x.transpose() / d;
    Ok(ScalarMeasure {
        value: d,
        j_a: g * j_p,
        j_b: g * j_l,
    })
}

/// Signed point-to-plane distance `n^T p - d`.
pub fn point_plane(p: &PointFeature, plane: &PlaneCp) -> Result<ScalarMeasure<3, 3>> {
    if plane.is_degenerate() {
        return Err(Error::DegeneratePlane(plane.distance()));
    }
    let n = plane.normal();
    let dn = plane.normal_jacobian();
    Ok(ScalarMeasure {
        value: n.dot(&p.p) - plane.distance(),
        j_a: n.transpose(),
        j_b: p.p.transpose() * dn - n.transpose(),
    })
}

pub fn line_line(a: &LineCp, b: &LineCp) -> Result<AngleDistance<4, 4>> {
    line_line_with(a, b, TAU_PARALLEL)
}

pub fn line_line_with(a: &LineCp, b: &LineCp, tau_parallel: f64) -> Result<AngleDistance<4, 4>> {
    if a.is_degenerate() || b.is_degenerate() {
        return Err(Error::DegenerateLine(a.distance().min(b.distance())));
    }
    let la = a.derivatives();
    let lb = b.derivatives();
    let alpha = la.vbar.dot(&lb.vbar);
    let cosine = ScalarMeasure {
        value: alpha,
        j_a: lb.vbar.transpose() * la.j_vbar,
        j_b: la.vbar.transpose() * lb.j_vbar,
    };
    let distance = (alpha.abs() >= 1.0 - tau_parallel).then(|| {
        let diff = la.closest_point() - lb.closest_point();
        let d = smooth_norm(&diff);
        let g = diff.transpose() / d;
        ScalarMeasure {
            value: d,
            j_a: g * la.closest_point_jacobian(),
            j_b: -g * lb.closest_point_jacobian(),
        }
    });
    Ok(AngleDistance { cosine, distance })
}

/// Common-perpendicular distance between two non-parallel lines.
pub fn line_line_skew(a: &LineCp, b: &LineCp) -> Result<ScalarMeasure<4, 4>> {
    if a.is_degenerate() || b.is_degenerate() {
        return Err(Error::DegenerateLine(a.distance().min(b.distance())));
    }
    let la = a.derivatives();
    let lb = b.derivatives();
    let w = la.vbar.cross(&lb.vbar);
    let wn = w.norm();
    if wn < 1e-9 {
        return Err(Error::DegeneratePair("parallel lines have no skew distance"));
    }
    let diff = la.closest_point() - lb.closest_point();
    let s = w.dot(&diff) / wn;
    let ds_dw = diff.transpose() / wn - s * w.transpose() / (wn * wn);
    let ds_ddiff = w.transpose() / wn;
    let dw_da = -skew(&lb.vbar) * la.j_vbar;
    let dw_db = skew(&la.vbar) * lb.j_vbar;
    let j_a = ds_dw * dw_da + ds_ddiff * la.closest_point_jacobian();
    let j_b = ds_dw * dw_db - ds_ddiff * lb.closest_point_jacobian();
    let d = (s * s + NORM_SMOOTHING).sqrt();
    Ok(ScalarMeasure {
        value: d,
        j_a: j_a * (s / d),
        j_b: j_b * (s / d),
    })
}

pub fn line_plane(line: &LineCp, plane: &PlaneCp) -> Result<AngleDistance<4, 3>> {
    line_plane_with(line, plane, TAU_PARALLEL)
}

pub fn line_plane_with(
    line: &LineCp,
    plane: &PlaneCp,
    tau_parallel: f64,
) -> Result<AngleDistance<4, 3>> {
    if line.is_degenerate() {
        return Err(Error::DegenerateLine(line.distance()));
    }
    if plane.is_degenerate() {
        return Err(Error::DegeneratePlane(plane.distance()));
    }
    let ld = line.derivatives();
    let n = plane.normal();
    let dn = plane.normal_jacobian();
    let alpha = ld.vbar.dot(&n);
    let cosine = ScalarMeasure {
        value: alpha,
        j_a: n.transpose() * ld.j_vbar,
        j_b: ld.vbar.transpose() * dn,
    };
    let distance = (alpha.abs() <= tau_parallel).then(|| {
        let c = ld.closest_point();
        ScalarMeasure {
            value: n.dot(&c) - plane.distance(),
            j_a: n.transpose() * ld.closest_point_jacobian(),
            j_b: c.transpose() * dn - n.transpose(),
        }
    });
    Ok(AngleDistance { cosine, distance })
}

pub fn plane_plane(a: &PlaneCp, b: &PlaneCp) -> Result<AngleDistance<3, 3>> {
    plane_plane_with(a, b, TAU_PARALLEL)
}

pub fn plane_plane_with(a: &PlaneCp, b: &PlaneCp, tau_parallel: f64) -> Result<AngleDistance<3, 3>> {
    if a.is_degenerate() || b.is_degenerate() {
        return Err(Error::DegeneratePlane(a.distance().min(b.distance())));
    }
    let na = a.normal();
    let nb = b.normal();
    let alpha = na.dot(&nb);
    let cosine = ScalarMeasure {
        value: alpha,
        j_a: nb.transpose() * a.normal_jacobian(),
        j_b: na.transpose() * b.normal_jacobian(),
    };
    let distance = (alpha.abs() >= 1.0 - tau_parallel).then(|| {
        let diff = b.cp - a.cp;
        let d = smooth_norm(&diff);
        let g = diff.transpose() / d;
        ScalarMeasure {
            value: d,
            j_a: -g * Matrix3::identity(),
            j_b: g,
        }
    });
    Ok(AngleDistance { cosine, distance })
}
