#![allow(dead_code)]

pub mod cases;

use nalgebra::{DMatrix, DVector, UnitQuaternion, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spins_core::factors::FactorEvaluation;
use spins_core::geometry::{ImuState, LineCp, PlaneCp, PointFeature, Pose};
use spins_core::solver::Factor;
use spins_core::state::SlidingWindowState;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn vec3(r: &mut ChaCha8Rng, s: f64) -> Vector3<f64> {
    Vector3::new(r.random_range(-s..s), r.random_range(-s..s), r.random_range(-s..s))
}

pub fn unit(r: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = vec3(r, 1.0);
        let n = v.norm();
        if n > 0.2 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn rotation(r: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    UnitQuaternion::from_scaled_axis(vec3(r, 2.0))
}

pub fn pose(r: &mut ChaCha8Rng) -> Pose {
    Pose::new(rotation(r), vec3(r, 3.0))
}

pub fn imu_state(r: &mut ChaCha8Rng) -> ImuState {
    ImuState {
        pose: pose(r),
        vel: vec3(r, 1.0),
        bg: vec3(r, 0.01),
        ba: vec3(r, 0.1),
    }
}

pub fn point(r: &mut ChaCha8Rng) -> PointFeature {
    PointFeature::new(vec3(r, 4.0))
}

/// Line at distance 0.5..4 from the origin.
pub fn line(r: &mut ChaCha8Rng) -> LineCp {
    let mut x = Vector4::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
    while x.norm() < 0.2 {
        x *= 2.0;
    }
    LineCp { x: x.normalize() * r.random_range(0.5..4.0) }
}

pub fn plane(r: &mut ChaCha8Rng) -> PlaneCp {
    PlaneCp { cp: unit(r) * r.random_range(0.5..4.0) }
}

/// Central differences of a factor residual w.r.t. every variable it
/// touches, in the order of the analytic Jacobians.
pub fn numeric_jacobians(f: &Factor, state: &SlidingWindowState, analytic: &FactorEvaluation) -> Vec<DMatrix<f64>> {
    const H: f64 = 1e-6;
    analytic
        .jacobians
        .iter()
        .map(|(key, j)| {
            let mut out = DMatrix::zeros(j.nrows(), key.dim());
            for c in 0..key.dim() {
                let mut d = vec![0.0; key.dim()];
                let eval = |d: &[f64]| -> DVector<f64> {
                    let mut s = state.clone();
                    s.boxplus_var(key, d);
                    f.evaluate(&s).unwrap().0.residual
                };
                d[c] = H;
                let plus = eval(&d);
                d[c] = -H;
                let minus = eval(&d);
                out.set_column(c, &((plus - minus) / (2.0 * H)));
            }
            out
        })
        .collect()
}

/// Largest Frobenius error relative to the Jacobian scale (at least 1).
pub fn jacobian_error(f: &Factor, state: &SlidingWindowState) -> f64 {
    let (ev, _) = f.evaluate(state).unwrap();
    let num = numeric_jacobians(f, state, &ev);
    ev.jacobians
        .iter()
        .zip(&num)
        .map(|((_, a), n)| (a - n).norm() / n.norm().max(1.0))
        .fold(0.0, f64::max)
}
