use std::f64::consts::TAU;

use nalgebra::UnitQuaternion;
use proptest::prelude::*;
use spins_sim::trajectory::{generate_trajectory, Trajectory, TrajectorySpec};

fn level(waypoints: Vec<[f64; 3]>, duration: f64, closed: bool) -> Trajectory {
    let spec = TrajectorySpec {
        waypoints,
        duration,
        closed,
        roll_amplitude: 0.0,
        pitch_amplitude: 0.0,
        attitude_cycles: 1.0,
    };
    generate_trajectory(&spec, None).unwrap()
}

#[test]
fn straight_line_has_no_acceleration() {
    let wps = (0..6).map(|i| [i as f64, 0.5 * i as f64, 0.0]).collect();
    let t = level(wps, 10.0, false);
    for k in 0..=1000 {
        let [_, v, a, _] = t.position(k as f64 * 0.01);
        assert!(a.norm() <= 1e-9);
        assert!((v - nalgebra::Vector3::new(0.5, 0.25, 0.0)).norm() <= 1e-9);
    }
}

#[test]
fn circle_has_centripetal_acceleration() {
    let (r, n, dur) = (3.0, 24, 30.0);
    let wps = (0..n)
        .map(|i| {
            let a = i as f64 * TAU / n as f64;
            [r * a.cos(), r * a.sin(), 0.0]
        })
        .collect();
    let t = level(wps, dur, true);
    let v = TAU * r / dur;
    for k in 0..300 {
        let a = t.position(k as f64 * 0.1)[2].norm();
        assert!((a - v * v / r).abs() <= 0.02 * v * v / r, "t {}: {a} vs {}", k as f64 * 0.1, v * v / r);
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let t = generate_trajectory(&TrajectorySpec::default(), None).unwrap();
    let h = 1e-6;
    for k in 1..400 {
        let s = k as f64 * 0.05 + 0.0123;
        let [p0, v0, a0, _] = t.position(s - h);
        let [p1, v1, a1, _] = t.position(s + h);
        let [_, v, a, _] = t.position(s);
        assert!(((p1 - p0) / (2.0 * h) - v).norm() <= 1e-6);
        assert!(((v1 - v0) / (2.0 * h) - a).norm() <= 1e-6);
        assert!((a1 - a0).norm() <= 1e-4);
    }
}

#[test]
fn rotation_rate_matches_attitude_derivative() {
    let t = generate_trajectory(&TrajectorySpec::default(), None).unwrap();
    let h = 1e-4;
    for k in 1..200 {
        let s = k as f64 * 0.1 + 0.0123;
        let r0 = UnitQuaternion::from_rotation_matrix(&t.at(s - h).rot);
        let r1 = UnitQuaternion::from_rotation_matrix(&t.at(s + h).rot);
        let numeric = (r0.inverse() * r1).scaled_axis() / (2.0 * h);
        let e = (numeric - t.at(s).omega).norm();
        assert!(e <= 1e-6, "{s}: {e:e}");
    }
}

#[test]
fn default_path_stays_in_default_room() {
    let spec = spins_sim::WorldSpec::default();
    assert!(generate_trajectory(&TrajectorySpec::default(), Some(spec.half_extents())).is_ok());
    let outside = TrajectorySpec {
        waypoints: vec![[0.0; 3], [9.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]],
        ..TrajectorySpec::default()
    };
    assert!(generate_trajectory(&outside, Some(spec.half_extents())).is_err());
}

proptest! {
    #[test]
    fn spline_passes_through_waypoints(ys in prop::collection::vec(-2.0f64..2.0, 4..10)) {
        let wps: Vec<[f64; 3]> = ys.iter().enumerate().map(|(i, y)| [i as f64 * 0.3, *y, 0.1 * y]).collect();
        let n = wps.len();
        for closed in [false, true] {
            let t = level(wps.clone(), 8.0, closed);
            let h = if closed { 8.0 / n as f64 } else { 8.0 / (n - 1) as f64 };
            for (i, w) in wps.iter().enumerate() {
                let p = t.position(i as f64 * h)[0];
                prop_assert!((p - nalgebra::Vector3::from(*w)).norm() < 1e-9);
            }
        }
    }
}
