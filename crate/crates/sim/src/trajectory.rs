//! C² cubic-spline trajectories with a heading-following attitude.

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use spins_core::geometry::Pose;

use crate::error::{Result, SimError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectorySpec {
    pub waypoints: Vec<[f64; 3]>,
    pub duration: f64,
    /// Periodic spline through the waypoints and back to the first one;
    /// otherwise a natural spline from the first to the last waypoint.
    pub closed: bool,
    /// Roll and pitch oscillation amplitudes, rad.
    pub roll_amplitude: f64,
    pub pitch_amplitude: f64,
    /// Attitude oscillation periods per trajectory duration.
    pub attitude_cycles: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        let waypoints = (0..8)
            .map(|i| {
                let a = i as f64 * std::f64::consts::TAU / 8.0;
                let z = if i % 2 == 0 { 0.25 } else { -0.25 };
                [3.0 * a.cos(), 2.5 * a.sin(), z]
            })
            .collect();
        Self {
            waypoints,
            duration: 20.0,
            closed: true,
            roll_amplitude: 0.05,
            pitch_amplitude: 0.05,
            attitude_cycles: 3.0,
        }
    }
}

/// Interpolating cubic spline of one coordinate with uniform knot spacing.
#[derive(Clone, Debug)]
struct Spline1 {
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
    h: f64,
    periodic: bool,
}

impl Spline1 {
    fn natural(y: Vec<f64>, h: f64) -> Self {
        let n = y.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            let k = n - 2;
            let mut a = DMatrix::zeros(k, k);
            let mut rhs = DVector::zeros(k);
            for i in 0..k {
                a[(i, i)] = 4.0;
                if i > 0 {
                    a[(i, i - 1)] = 1.0;
                }
                if i + 1 < k {
                    a[(i, i + 1)] = 1.0;
                }
                rhs[i] = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]) / (h * h);
            }
            let sol = a.lu().solve(&rhs).expect("spline system is diagonally dominant");
            m[1..n - 1].copy_from_slice(sol.as_slice());
        }
        Self { y, m, h, periodic: false }
    }

    /// `y` holds one period without repeating the first value.
    fn periodic(mut y: Vec<f64>, h: f64) -> Self {
        let n = y.len();
        let mut a = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for i in 0..n {
            let (prev, next) = ((i + n - 1) % n, (i + 1) % n);
            a[(i, i)] += 4.0;
            a[(i, prev)] += 1.0;
            a[(i, next)] += 1.0;
            rhs[i] = 6.0 * (y[next] - 2.0 * y[i] + y[prev]) / (h * h);
        }
        let sol = a.lu().solve(&rhs).expect("periodic spline system is regular");
        let mut m: Vec<f64> = sol.iter().copied().collect();
        y.push(y[0]);
        m.push(m[0]);
        Self { y, m, h, periodic: true }
    }

    fn span(&self) -> f64 {
        self.h * (self.y.len() - 1) as f64
    }

    /// Value and first three derivatives at `t`.
    fn eval(&self, t: f64) -> [f64; 4] {
        let span = self.span();
        let t = if self.periodic {
            t.rem_euclid(span)
        } else {
            t.clamp(0.0, span)
        };
        let segs = self.y.len() - 1;
        let i = ((t / self.h).floor() as usize).min(segs - 1);
        let h = self.h;
        let s = t - i as f64 * h;
        let r = h - s;
        let (m0, m1, y0, y1) = (self.m[i], self.m[i + 1], self.y[i], self.y[i + 1]);
        let c0 = y0 / h - m0 * h / 6.0;
        let c1 = y1 / h - m1 * h / 6.0;
        [
            m0 * r.powi(3) / (6.0 * h) + m1 * s.powi(3) / (6.0 * h) + c0 * r + c1 * s,
            -m0 * r * r / (2.0 * h) + m1 * s * s / (2.0 * h) - c0 + c1,
            m0 * r / h + m1 * s / h,
            (m1 - m0) / h,
        ]
    }
}

/// Kinematic state at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kinematics {
    pub t: f64,
    pub pos: Vector3<f64>,
    pub vel: Vector3<f64>,
    pub acc: Vector3<f64>,
    /// Rotation body -> global.
    pub rot: Rotation3<f64>,
    /// Angular rate in the body frame, rad/s.
    pub omega: Vector3<f64>,
}

impl Kinematics {
    /// Pose in the estimator convention (rotation global -> body).
    pub fn pose(&self) -> Pose {
        Pose::new(UnitQuaternion::from_rotation_matrix(&self.rot.inverse()), self.pos)
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub spec: TrajectorySpec,
    axes: [Spline1; 3],
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.spec.duration
    }

    /// Position and its first three time derivatives.
    pub fn position(&self, t: f64) -> [Vector3<f64>; 4] {
        let e = [self.axes[0].eval(t), self.axes[1].eval(t), self.axes[2].eval(t)];
        let mut out = [Vector3::zeros(); 4];
        for (d, o) in out.iter_mut().enumerate() {
            *o = Vector3::new(e[0][d], e[1][d], e[2][d]);
        }
        out
    }

    fn attitude(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        let w = std::f64::consts::TAU * self.spec.attitude_cycles / self.spec.duration;
        let (ar, ap) = (self.spec.roll_amplitude, self.spec.pitch_amplitude);
        (
            [ar * (w * t).sin(), ap * (w * t).cos()],
            [ar * w * (w * t).cos(), -ap * w * (w * t).sin()],
        )
    }

    pub fn at(&self, t: f64) -> Kinematics {
        let [pos, vel, acc, _] = self.position(t);
        let speed2 = vel.x * vel.x + vel.y * vel.y;
        let (yaw, yaw_rate) = if speed2 > 1e-18 {
            (vel.y.atan2(vel.x), (vel.x * acc.y - vel.y * acc.x) / speed2)
        } else {
            (0.0, 0.0)
        };
        let ([roll, pitch], [roll_rate, pitch_rate]) = self.attitude(t);
        let rot = Rotation3::from_euler_angles(roll, pitch, yaw);
        // ZYX Euler rates to body angular velocity
        let (sr, cr) = roll.sin_cos();
        let (sp, cp) = pitch.sin_cos();
        let omega = Vector3::new(
            roll_rate - yaw_rate * sp,
            pitch_rate * cr + yaw_rate * sr * cp,
            -pitch_rate * sr + yaw_rate * cr * cp,
        );
        Kinematics {
            t,
            pos,
            vel,
            acc,
            rot,
            omega,
        }
    }

    /// Rotation body -> global only.
    pub fn rotation(&self, t: f64) -> Matrix3<f64> {
        self.at(t).rot.into_inner()
    }
}

/// Cubic spline through `spec.waypoints` with uniform knot timing. Waypoints
/// outside `room_half` (when given) are rejected.
pub fn generate_trajectory(spec: &TrajectorySpec, room_half: Option<Vector3<f64>>) -> Result<Trajectory> {
    let n = spec.waypoints.len();
    if n < 4 {
        return Err(SimError::InvalidScenario(format!("need at least 4 waypoints, got {n}")));
    }
    if !(spec.duration > 0.0) {
        return Err(SimError::InvalidScenario("duration must be positive".into()));
    }
    if let Some(h) = room_half {
        for w in &spec.waypoints {
            if (0..3).any(|i| w[i].abs() >= h[i]) {
                return Err(SimError::InvalidScenario(format!("waypoint {w:?} outside the room")));
            }
        }
    }
    let coord = |i: usize| spec.waypoints.iter().map(|w| w[i]).collect::<Vec<_>>();
    let axes = if spec.closed {
        let h = spec.duration / n as f64;
        [0, 1, 2].map(|i| Spline1::periodic(coord(i), h))
    } else {
        let h = spec.duration / (n - 1) as f64;
        [0, 1, 2].map(|i| Spline1::natural(coord(i), h))
    };
    let traj = Trajectory {
        spec: spec.clone(),
        axes,
    };
    if let Some(h) = room_half {
        let steps = (spec.duration * 100.0).ceil() as usize;
        for k in 0..=steps {
            let p = traj.position(spec.duration * k as f64 / steps as f64)[0];
            if (0..3).any(|i| p[i].abs() >= h[i]) {
                return Err(SimError::InvalidScenario(format!("trajectory leaves the room at {p:?}")));
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn natural_spline_reproduces_knots() {
        let s = Spline1::natural(vec![0.0, 1.0, 4.0, 9.0, 16.0], 0.5);
        for (i, y) in [0.0, 1.0, 4.0, 9.0, 16.0].iter().enumerate() {
            assert!((s.eval(i as f64 * 0.5)[0] - y).abs() < 1e-12);
        }
        assert!(s.eval(0.0)[2].abs() < 1e-12);
    }

    #[test]
    fn periodic_spline_wraps_smoothly() {
        let s = Spline1::periodic(vec![0.0, 1.0, 0.0, -1.0], 1.0);
        let a = s.eval(0.0);
        let b = s.eval(4.0 - 1e-12);
        for d in 0..3 {
            assert!((a[d] - b[d]).abs() < 1e-9, "derivative {d}");
        }
    }

    #[test]
    fn hover_has_no_rotation_rate() {
        let spec = TrajectorySpec {
            waypoints: vec![[1.0, 1.0, 0.0]; 4],
            roll_amplitude: 0.0,
            pitch_amplitude: 0.0,
            ..Default::default()
        };
        let k = generate_trajectory(&spec, None).unwrap().at(3.3);
        assert_eq!(k.omega, Vector3::zeros());
        assert_eq!(k.acc, Vector3::zeros());
    }
}
