use std::f64::consts::FRAC_PI_2;

use approx::assert_relative_eq;
use nalgebra::{Matrix3, UnitQuaternion, Vector3, Vector4};
use proptest::prelude::*;

use spins_core::geometry::*;
use spins_core::state::{SlidingWindowState, VarKey};

fn v3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::from(a)
}

fn arb_vec(s: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-s..s).prop_map(v3)
}

fn arb_rot() -> impl Strategy<Value = UnitQuaternion<f64>> {
    arb_vec(3.0).prop_map(UnitQuaternion::from_scaled_axis)
}

fn arb_pose() -> impl Strategy<Value = Pose> {
    (arb_rot(), arb_vec(5.0)).prop_map(|(q, p)| Pose::new(q, p))
}

/// Plücker line at least 0.1 m from the origin, with an arbitrary scale.
fn arb_line() -> impl Strategy<Value = PlueckerLine> {
    (arb_vec(5.0), arb_vec(1.0), 0.2..3.0f64)
        .prop_filter("direction", |(_, v, _)| v.norm() > 0.1)
        .prop_map(|(p, v, s)| PlueckerLine::from_point_dir(&p, &(v * s)))
        .prop_filter("through origin", |l| l.distance() > 0.1)
}

fn arb_plane() -> impl Strategy<Value = Plane> {
    (arb_vec(1.0), 0.1..6.0f64)
        .prop_filter("normal", |(n, _)| n.norm() > 0.1)
        .prop_map(|(n, d)| Plane::new(n.normalize(), d))
}

fn same_line(a: &PlueckerLine, b: &PlueckerLine) -> f64 {
    let (a, b) = (a.normalized(), b.normalized());
    (a.n - b.n).norm() + (a.v - b.v).norm()
}

#[test]
fn quarter_turn_retraction() {
    let p = Pose::identity().boxplus(&[0.0, 0.0, FRAC_PI_2, 0.0, 0.0, 0.0]);
    let q = p.rot.quaternion();
    assert_relative_eq!(q.w, std::f64::consts::FRAC_PI_4.cos(), epsilon = 1e-12);
    assert_relative_eq!(q.k, (std::f64::consts::FRAC_PI_4).sin(), epsilon = 1e-12);
    assert_relative_eq!(q.i, 0.0);
    assert_relative_eq!(q.j, 0.0);
    assert_eq!(Pose::identity().boxplus(&[0.0; 6]), Pose::identity());
}

#[test]
fn hand_line_to_closest_point() {
    let l = PlueckerLine::from_points(&v3([1.0, 0.0, 0.0]), &v3([1.0, 0.0, 1.0]));
    assert_eq!(l.n, v3([0.0, -1.0, 0.0]));
    assert_eq!(l.v, v3([0.0, 0.0, 1.0]));
    let cp = pluecker_to_cp(&l).unwrap();
    assert_relative_eq!(cp.distance(), 1.0, epsilon = 1e-12);
    let r = cp.rotation();
    let expect = Matrix3::from_columns(&[v3([0.0, -1.0, 0.0]), v3([0.0, 0.0, 1.0]), v3([-1.0, 0.0, 0.0])]);
    assert_relative_eq!(r, expect, epsilon = 1e-12);
    assert_relative_eq!(cp.closest_point(), v3([1.0, 0.0, 0.0]), epsilon = 1e-12);

    let back = cp_to_pluecker(&cp);
    assert_relative_eq!(back.n, v3([0.0, -1.0, 0.0]), epsilon = 1e-12);
    assert_relative_eq!(back.v, v3([0.0, 0.0, 1.0]), epsilon = 1e-12);

    let scaled = PlueckerLine { n: l.n * 2.0, v: l.v * 2.0 };
    assert_relative_eq!(pluecker_to_cp(&scaled).unwrap().x, cp.x, epsilon = 1e-15);
}

#[test]
fn zero_distance_line() {
    let cp = LineCp { x: Vector4::zeros() };
    assert_eq!(cp_to_pluecker(&cp).n, Vector3::zeros());
    assert!(cp.is_degenerate());
    let through_origin = PlueckerLine::from_point_dir(&Vector3::zeros(), &v3([0.0, 1.0, 0.0]));
    assert!(pluecker_to_cp(&through_origin).is_err());
}

#[test]
fn line_through_sensor_has_zero_moment() {
    let pose = Pose::new(UnitQuaternion::identity(), v3([1.0, 0.0, 0.0]));
    let l = PlueckerLine::from_point_dir(&v3([1.0, 0.0, 0.0]), &v3([0.0, 0.0, 1.0]));
    let local = transform_line(&pose, &l);
    assert_relative_eq!(local.n.norm(), 0.0, epsilon = 1e-15);
    assert_relative_eq!(local.v, v3([0.0, 0.0, 1.0]));
    let same = transform_line(&Pose::identity(), &l);
    assert_eq!((same.n, same.v), (l.n, l.v));
}

#[test]
fn plane_hand_transforms() {
    let z2 = Plane::new(v3([0.0, 0.0, 1.0]), 2.0);
    assert_eq!(transform_plane(&Pose::identity(), &z2), z2);
    let up = Pose::new(UnitQuaternion::identity(), v3([0.0, 0.0, 1.0]));
    let local = transform_plane(&up, &z2);
    assert_relative_eq!(local.n, v3([0.0, 0.0, 1.0]));
    assert_relative_eq!(local.d, 1.0);
}

#[test]
fn window_tangent_dimension() {
    let mut s = SlidingWindowState::new();
    s.imu.insert(0, ImuState::default());
    s.imu.insert(1, ImuState::default());
    s.points.insert(0, PointFeature::new(Vector3::zeros()));
    s.lines.insert(0, LineCp { x: Vector4::new(1.0, 0.0, 0.0, 0.0) });
    s.planes.insert(0, PlaneCp { cp: v3([0.0, 0.0, 1.0]) });
    assert_eq!(s.tangent_dim(), 2 * 15 + 3 + 4 + 3);
    assert_eq!(
        s.keys(),
        vec![VarKey::Imu(0), VarKey::Imu(1), VarKey::Point(0), VarKey::Line(0), VarKey::Plane(0)]
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn retraction_keeps_quaternion_unit(pose in arb_pose(), d in prop::array::uniform6(-3.0..3.0f64)) {
        let x = pose.boxplus(&d);
        prop_assert!((x.rot.quaternion().norm() - 1.0).abs() <= 1e-12);
        prop_assert!(x.rot.quaternion().w >= 0.0);
        let r = x.rotation();
        prop_assert!((r.transpose() * r - Matrix3::identity()).norm() <= 1e-9);
        prop_assert!((r.determinant() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn retraction_composes_to_first_order(
        pose in arb_pose(),
        d1 in prop::array::uniform6(-1e-4..1e-4f64),
        d2 in prop::array::uniform6(-1e-4..1e-4f64),
    ) {
        let sum: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| a + b).collect();
        let a = pose.boxplus(&d1).boxplus(&d2);
        let b = pose.boxplus(&sum);
        prop_assert!(a.boxminus(&b).norm() <= 1e-7);
    }

    #[test]
    fn imu_state_boxminus_inverts_boxplus(pose in arb_pose(), d in prop::collection::vec(-1.0..1.0f64, 15)) {
        let x = ImuState { pose, ..Default::default() };
        let y = x.boxplus(&d);
        let back = y.boxminus(&x);
        for i in 0..15 {
            prop_assert!((back[i] - d[i]).abs() <= 1e-9);
        }
        prop_assert_eq!(x.boxplus(&[0.0; 15]), x);
    }

    #[test]
    fn line_round_trip(l in arb_line()) {
        let cp = pluecker_to_cp(&l).unwrap();
        prop_assert!(same_line(&cp_to_pluecker(&cp), &l) <= 1e-12);
        prop_assert!((cp.distance() - l.distance()).abs() <= 1e-9);
        let r = cp.rotation();
        prop_assert!((r.transpose() * r - Matrix3::identity()).norm() <= 1e-12);
        let back = cp_to_pluecker(&cp);
        prop_assert!(back.n.dot(&back.v).abs() <= 1e-12);
    }

    #[test]
    fn line_transform_inverts(pose in arb_pose(), l in arb_line()) {
        let there = transform_line(&pose, &l);
        let back = transform_line(&pose.inverse(), &there);
        prop_assert!(same_line(&back, &l) <= 1e-12 * (1.0 + l.normalized().n.norm()));
        prop_assert!(there.n.dot(&there.v).abs() <= 1e-9 * there.v.norm_squared().max(1.0) * 10.0);
    }

    #[test]
    fn line_transform_keeps_incidence(pose in arb_pose(), l in arb_line(), s in -5.0..5.0f64) {
        let u = l.normalized();
        let p = u.closest_point() + u.v * s;
        let local = transform_line(&pose, &l);
        prop_assert!(local.distance_to_point(&pose.to_local(&p)) <= 1e-9);
    }

    #[test]
    fn plane_round_trip(pose in arb_pose(), pl in arb_plane()) {
        let cp = PlaneCp::from_plane(&pl).unwrap();
        let back = cp.to_plane();
        prop_assert!((back.n - pl.n).norm() <= 1e-12 && (back.d - pl.d).abs() <= 1e-12);
        let there = transform_plane(&pose, &pl);
        prop_assert!((there.n.norm() - 1.0).abs() <= 1e-12);
        let again = transform_plane(&pose.inverse(), &there);
        prop_assert!((again.n - pl.n).norm() <= 1e-12 && (again.d - pl.d).abs() <= 1e-11);
    }

    #[test]
    fn plane_transform_keeps_incidence(pose in arb_pose(), pl in arb_plane(), t in arb_vec(4.0)) {
        let p = t - pl.n * (pl.n.dot(&t) - pl.d);
        let local = transform_plane(&pose, &pl);
        prop_assert!(local.signed_distance(&pose.to_local(&p)).abs() <= 1e-9);
    }
}
