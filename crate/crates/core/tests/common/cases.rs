//! Randomised factor configurations shared by the Jacobian tests and the
//! acceptance suite.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, Vector3};
use rand::Rng;

use super::*;
use spins_core::factors::{preintegrate, prior_factor, ImuNoise, ImuSample, LineMeasurement, PlaneMeasurement, PointMeasurement, GRAVITY};
use spins_core::geometry::{cp_to_pluecker, pluecker_to_cp, transform_line, transform_plane, Plane, PlaneCp, PlueckerLine, PointFeature};
use spins_core::priors::{evaluate_structure_factor, measure_kind, AssociatedPriorFactor, FeatureType, PriorComponent, PriorKind, StructurePrior};
use spins_core::priors::measure::TAU_PARALLEL;
use spins_core::solver::Factor;
use spins_core::state::{SlidingWindowState, VarKey, VarValue};

pub type Case = (Factor, SlidingWindowState);

pub fn window(states: &[(u64, spins_core::geometry::ImuState)]) -> SlidingWindowState {
    let mut s = SlidingWindowState::new();
    for (k, x) in states {
        s.imu.insert(*k, *x);
    }
    s
}

pub fn point_case(seed: u64) -> Option<Case> {
    let r = &mut rng(seed);
    let x = imu_state(r);
    let p = point(r);
    let z = x.pose.to_local(&p.p) + vec3(r, 0.05);
    let mut s = window(&[(0, x)]);
    s.points.insert(7, p);
    Some((Factor::point(0, 7, PointMeasurement { z, sigma: Matrix3::identity() * 1e-4 }), s))
}

pub fn line_case(seed: u64) -> Option<Case> {
    let r = &mut rng(seed);
    let x = imu_state(r);
    let l = line(r);
    let local = transform_line(&x.pose, &cp_to_pluecker(&l)).normalized();
    let mut z = local.to_vector();
    for i in 0..6 {
        z[i] += r.random_range(-0.02..0.02);
    }
    let mut s = window(&[(0, x)]);
    s.lines.insert(3, l);
    Some((Factor::line(0, 3, LineMeasurement { z, sigma: Matrix6::identity() * 1e-4 }), s))
}

pub fn plane_case(seed: u64) -> Option<Case> {
    let r = &mut rng(seed);
    let x = imu_state(r);
    let pl = plane(r);
    let local = PlaneCp::from_plane(&transform_plane(&x.pose, &pl.to_plane())).ok()?;
    if local.distance() < 0.2 {
        return None;
    }
    let z = local.cp + vec3(r, 0.02);
    let mut s = window(&[(0, x)]);
    s.planes.insert(1, pl);
    Some((Factor::plane(0, 1, PlaneMeasurement { z, sigma: Matrix3::identity() * 1e-4 }), s))
}

pub fn imu_case(seed: u64) -> Option<Case> {
    let r = &mut rng(seed);
    let bg = vec3(r, 0.01);
    let ba = vec3(r, 0.1);
    let (w, a) = (vec3(r, 0.5), vec3(r, 2.0) - GRAVITY);
    let samples: Vec<ImuSample> = (0..=20)
        .map(|i| ImuSample {
            t: 0.005 * i as f64,
            gyro: w + vec3(r, 0.05),
            accel: a + vec3(r, 0.3),
        })
        .collect();
    let pre = preintegrate(&samples, &bg, &ba, &ImuNoise::default());
    let xi = imu_state(r);
    // end state near the prediction so the rotation residual stays moderate
    let mut xj = pre.predict(&xi, &GRAVITY);
    xj.pose.rot *= spins_core::so3::exp(&vec3(r, 0.2));
    xj.pose.pos += vec3(r, 0.2);
    xj.vel += vec3(r, 0.2);
    xj.bg += vec3(r, 0.01);
    xj.ba += vec3(r, 0.05);
    let s = window(&[(4, xi), (5, xj)]);
    Some((Factor::imu(4, 5, pre, GRAVITY), s))
}

pub fn prior_case(seed: u64) -> Option<Case> {
    let r = &mut rng(seed);
    let mut mean = window(&[(0, imu_state(r)), (1, imu_state(r))]);
    mean.points.insert(0, point(r));
    mean.lines.insert(0, line(r));
    mean.planes.insert(0, plane(r));
    let n = mean.tangent_dim();
    let a = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    let info = &a * a.transpose() + DMatrix::identity(n, n);
    let prior = prior_factor(&mean, info);
    let delta = DVector::from_fn(n, |_, _| r.random_range(-0.3..0.3));
    Some((Factor::Prior(prior), mean.boxplus(&delta)))
}

pub fn structure_case(kind: PriorKind, seed: u64) -> Option<Case> {
    let r = &mut rng(seed);
    let mut s = SlidingWindowState::new();
    let (ta, tb) = kind.endpoints();
    let mut add = |t: FeatureType, id: u32, s: &mut SlidingWindowState| match t {
        FeatureType::Point => {
            s.points.insert(id, point(r));
            VarKey::Point(id)
        }
        FeatureType::Line => {
            s.lines.insert(id, line(r));
            VarKey::Line(id)
        }
        FeatureType::Plane => {
            s.planes.insert(id, plane(r));
            VarKey::Plane(id)
        }
    };
    let a = add(ta, 0, &mut s);
    let b = add(tb, 1, &mut s);
    let (xa, xb) = (s.get(&a).unwrap(), s.get(&b).unwrap());
    let (v, _, _) = measure_kind(kind, &xa, &xb, 0.0, false).ok()??;
    // keep clear of the kinks of absolute values and distance norms
    if !kind.is_angle() && v.abs() < 0.05 {
        return None;
    }
    let prior = StructurePrior {
        kind,
        value: v + 0.1,
        sigma: 0.01,
        support: 2,
    };
    let f = AssociatedPriorFactor {
        a,
        b,
        components: vec![PriorComponent { kind, prior }],
    };
    Some((Factor::structure(f), s))
}

/// Angle and distance of one line-plane pair in a single factor.
pub fn stacked_case(seed: u64) -> Option<Case> {
    let (f, s) = structure_case(PriorKind::LinePlaneDist, seed)?;
    let Factor::Structure { mut factor, .. } = f else { unreachable!() };
    factor.components.insert(
        0,
        PriorComponent {
            kind: PriorKind::LinePlaneAngle,
            prior: StructurePrior {
                kind: PriorKind::LinePlaneAngle,
                value: 0.0,
                sigma: 0.02,
                support: 2,
            },
        },
    );
    Some((Factor::structure(factor), s))
}

/// Every factor family by name.
pub fn all_cases() -> Vec<(String, Box<dyn Fn(u64) -> Option<Case>>)> {
    let mut out: Vec<(String, Box<dyn Fn(u64) -> Option<Case>>)> = vec![
        ("point".into(), Box::new(point_case)),
        ("line".into(), Box::new(line_case)),
        ("plane".into(), Box::new(plane_case)),
        ("imu".into(), Box::new(imu_case)),
        ("prior".into(), Box::new(prior_case)),
        ("line-plane stacked".into(), Box::new(stacked_case)),
    ];
    for kind in PriorKind::ALL {
        out.push((format!("{kind:?}"), Box::new(move |seed| structure_case(kind, seed))));
    }
    out
}

/// Worst relative Jacobian error over `n` non-degenerate draws.
pub fn worst_jacobian_error(case: &dyn Fn(u64) -> Option<Case>, n: u64) -> f64 {
    let (mut worst, mut done, mut seed) = (0.0f64, 0, 0);
    while done < n {
        seed += 1;
        assert!(seed < 20 * n, "too many degenerate draws");
        let Some((f, s)) = case(seed) else { continue };
        worst = worst.max(jacobian_error(&f, &s));
        done += 1;
    }
    worst
}

fn v3(x: f64, y: f64, z: f64) -> Vector3<f64> {
    Vector3::new(x, y, z)
}

/// A geometrically exact configuration for `kind` with the value it realises.
pub fn exact_configuration(kind: PriorKind, seed: u64) -> (VarValue, VarValue, f64) {
    use PriorKind::*;
    let (x, y, z) = (Vector3::x(), Vector3::y(), Vector3::z());
    let r = &mut rng(seed);
    let rot = rotation(r);
    let shift = vec3(r, 2.0);
    // build in a canonical frame, then move everything by a random rigid motion
    let moved = |x: Vector3<f64>| rot * x + shift;
    let p = |x: Vector3<f64>| VarValue::Point(PointFeature::new(moved(x)));
    let l = |p0: Vector3<f64>, v: Vector3<f64>| {
        let g = PlueckerLine::from_point_dir(&moved(p0), &(rot * v));
        VarValue::Line(pluecker_to_cp(&g).unwrap())
    };
    let plane = |n: Vector3<f64>, d: f64| {
        let gn = rot * n;
        let gd = d + gn.dot(&shift);
        VarValue::Plane(PlaneCp::from_plane(&Plane::new(gn, gd)).unwrap())
    };
    let sep = r.random_range(0.5..3.0);
    match kind {
        PointPointDist => (p(v3(0.3, 0.2, 0.1)), p(v3(0.3 + sep, 0.2, 0.1)), sep),
        PointLineDist => (p(v3(sep, 0.0, 4.0)), l(v3(0.0, 0.0, 7.0), z), sep),
        PointPlaneDist => (p(v3(1.0, -2.0, 5.0 + sep)), plane(z, 5.0), sep),
        LineLineAngle => (l(v3(0.0, 0.0, 3.0), x), l(v3(1.0, 0.0, 6.0), y), 0.0),
        LineLineDist => (l(v3(0.0, 4.0, 3.0), x), l(v3(0.0, 4.0 + sep, 3.0), x), sep),
        LineLineSkewDist => (l(v3(0.0, 4.0, 3.0), x), l(v3(2.0, 4.0, 3.0 + sep), y), sep),
        LinePlaneAngle => (l(v3(1.0, 1.0, 0.0), z), plane(z, 4.0), 1.0),
        LinePlaneDist => (l(v3(1.0, 1.0, 4.0 + sep), x), plane(z, 4.0), sep),
        PlanePlaneAngle => (plane(z, 4.0), plane(x, 3.0), 0.0),
        PlanePlaneDist => (plane(z, 4.0), plane(z, 4.0 + sep), sep),
    }
}

/// Residual norm of the associated factor on an exact configuration.
pub fn exact_residual(kind: PriorKind, seed: u64) -> f64 {
    let (a, b, value) = exact_configuration(kind, seed);
    let mut s = SlidingWindowState::new();
    let key = |v: &VarValue, id| match v {
        VarValue::Point(_) => VarKey::Point(id),
        VarValue::Line(_) => VarKey::Line(id),
        VarValue::Plane(_) => VarKey::Plane(id),
        VarValue::Imu(_) => unreachable!(),
    };
    let (ka, kb) = (key(&a, 0), key(&b, 1));
    s.set(&ka, a);
    s.set(&kb, b);
    let (measured, _, _) = measure_kind(kind, &a, &b, TAU_PARALLEL, true).unwrap().unwrap();
    // signed kinds may realise -value depending on the random motion
    let target = if measured < 0.0 { -value } else { value };
    let f = AssociatedPriorFactor {
        a: ka,
        b: kb,
        components: vec![PriorComponent {
            kind,
            prior: StructurePrior { kind, value: target, sigma: 0.01, support: 1 },
        }],
    };
    evaluate_structure_factor(&f, &s).unwrap().residual.norm()
}
