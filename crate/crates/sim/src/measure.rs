//! Feature observations with range / cone visibility and Gaussian noise.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use spins_core::estimator::MeasurementFrame;
use spins_core::factors::{LineMeasurement, PlaneMeasurement, PointMeasurement};
use spins_core::geometry::{transform_line, transform_plane, Pose, EPS_LINE, EPS_PLANE};

use crate::imu::gaussian3;
use crate::trajectory::Trajectory;
use crate::world::World;

/// Sensor cone along body x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Fov {
    pub range: f64,
    /// Half-angle of the cone, degrees.
    pub half_angle_deg: f64,
}

impl Default for Fov {
    fn default() -> Self {
        Self {
            range: 8.0,
            half_angle_deg: 60.0,
        }
    }
}

impl Fov {
    /// Whether a body-frame point is inside the cone.
    pub fn sees(&self, local: &Vector3<f64>) -> bool {
        let r = local.norm();
        if r > self.range || r == 0.0 {
            return false;
        }
        local.x / r >= self.half_angle_deg.to_radians().cos()
    }
}

/// Per-component standard deviations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureNoise {
    pub point: f64,
    pub line: f64,
    pub plane: f64,
}

impl Default for FeatureNoise {
    fn default() -> Self {
        Self {
            point: 0.05,
            line: 0.02,
            plane: 0.01,
        }
    }
}

/// Sample points per line segment and per patch side used for visibility.
const LINE_SAMPLES: usize = 9;
const PATCH_SAMPLES: usize = 5;

/// Observations of every visible primitive at `pose`.
pub fn observe(
    pose: &Pose,
    world: &World,
    fov: &Fov,
    noise: &FeatureNoise,
    rng: Option<&mut ChaCha8Rng>,
) -> (
    Vec<(u32, PointMeasurement)>,
    Vec<(u32, LineMeasurement)>,
    Vec<(u32, PlaneMeasurement)>,
) {
    let mut rng = rng;
    let visible = |pts: &[Vector3<f64>]| pts.iter().any(|p| fov.sees(&pose.to_local(p)));

    let point_cov = Matrix3::identity() * noise.point.powi(2);
    let mut points = Vec::new();
    for (i, p) in world.points.iter().enumerate() {
        if !fov.sees(&pose.to_local(p)) {
            continue;
        }
        let mut z = pose.to_local(p);
        if let Some(r) = rng.as_deref_mut() {
            z += noise.point * gaussian3(r);
        }
        points.push((i as u32, PointMeasurement { z, sigma: point_cov }));
    }

    let line_cov = Matrix6::identity() * noise.line.powi(2);
    let mut lines = Vec::new();
    for (i, l) in world.lines.iter().enumerate() {
        if !visible(&l.samples(LINE_SAMPLES)) {
            continue;
        }
        let local = transform_line(pose, &l.line);
        let vn = local.v.norm();
        if local.n.norm() / vn < EPS_LINE {
            continue;
        }
        let mut z = Vector6::new(
            local.n.x / vn,
            local.n.y / vn,
            local.n.z / vn,
            local.v.x / vn,
            local.v.y / vn,
            local.v.z / vn,
        );
        if let Some(r) = rng.as_deref_mut() {
            z += Vector6::from_fn(|_, _| noise.line * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, r));
        }
        lines.push((i as u32, LineMeasurement { z, sigma: line_cov }));
    }

    let plane_cov = Matrix3::identity() * noise.plane.powi(2);
    let mut planes = Vec::new();
    for (i, pl) in world.planes.iter().enumerate() {
        if !visible(&pl.patch.samples(PATCH_SAMPLES)) {
            continue;
        }
        let local = transform_plane(pose, &pl.plane);
        if local.d.abs() < EPS_PLANE {
            continue;
        }
        let mut z = local.d * local.n;
        if let Some(r) = rng.as_deref_mut() {
            z += noise.plane * gaussian3(r);
        }
        planes.push((i as u32, PlaneMeasurement { z, sigma: plane_cov }));
    }
    (points, lines, planes)
}

/// Frames `k = 0..=duration*rate` at `t = k / rate`.
pub fn simulate_measurements(
    traj: &Trajectory,
    world: &World,
    fov: &Fov,
    noise: &FeatureNoise,
    rate: f64,
    seed: u64,
    noisy: bool,
) -> Vec<MeasurementFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let n = crate::imu::sample_count(traj.duration(), rate);
    (0..n)
        .map(|k| {
            let t = k as f64 / rate;
            let pose = traj.at(t).pose();
            let (points, lines, planes) =
                observe(&pose, world, fov, noise, noisy.then_some(&mut rng));
            MeasurementFrame {
                index: k as u64,
                t,
                points,
                lines,
                planes,
            }
        })
        .collect()
}
