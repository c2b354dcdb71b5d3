//! Analytic Jacobians of every factor against central differences.

mod common;

use std::time::Instant;

use nalgebra::Matrix3;

use common::cases::*;
use common::*;
use spins_core::factors::PointMeasurement;
use spins_core::priors::PriorKind;
use spins_core::solver::Factor;

const CASES: u64 = 120;
const TOL: f64 = 1e-5;

fn check(name: &str, case: impl Fn(u64) -> Option<Case>) {
    let t0 = Instant::now();
    let worst = worst_jacobian_error(&case, CASES);
    eprintln!("{name}: {CASES} cases, worst {worst:.2e}, {:.2?}", t0.elapsed());
    assert!(worst <= TOL, "{name}: relative error {worst:e}");
}

#[test]
fn point_factor_jacobians() {
    check("point", point_case);
}

#[test]
fn line_factor_jacobians() {
    check("line", line_case);
}

#[test]
fn plane_factor_jacobians() {
    check("plane", plane_case);
}

#[test]
fn imu_factor_jacobians() {
    check("imu", imu_case);
}

#[test]
fn linear_prior_jacobians() {
    check("prior", prior_case);
}

#[test]
fn structure_factor_jacobians() {
    for kind in PriorKind::ALL {
        check(&format!("{kind:?}"), |seed| structure_case(kind, seed));
    }
}

#[test]
fn stacked_structure_factor_jacobians() {
    check("line-plane stacked", stacked_case);
}

#[test]
fn measurement_residual_vanishes_at_truth() {
    let r = &mut rng(99);
    let x = imu_state(r);
    let p = point(r);
    let z = x.pose.to_local(&p.p);
    let mut s = window(&[(0, x)]);
    s.points.insert(0, p);
    let (ev, _) = Factor::point(0, 0, PointMeasurement { z, sigma: Matrix3::identity() })
        .evaluate(&s)
        .unwrap();
    assert!(ev.residual.norm() < 1e-12);
}
