//! IMU sample synthesis from trajectory kinematics.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use spins_core::factors::{ImuNoise, ImuSample, GRAVITY};
use spins_core::geometry::ImuState;

use crate::trajectory::Trajectory;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImuSpec {
    pub noise: ImuNoise,
    pub rate: f64,
    pub gravity: [f64; 3],
}

impl Default for ImuSpec {
    fn default() -> Self {
        Self {
            noise: ImuNoise::default(),
            rate: 200.0,
            gravity: GRAVITY.into(),
        }
    }
}

impl ImuSpec {
    pub fn gravity(&self) -> Vector3<f64> {
        Vector3::from(self.gravity)
    }
}

/// Samples with the true biases that were added to each of them.
#[derive(Clone, Debug, Default)]
pub struct ImuData {
    pub samples: Vec<ImuSample>,
    pub gyro_bias: Vec<Vector3<f64>>,
    pub accel_bias: Vec<Vector3<f64>>,
}

impl ImuData {
    /// Ground-truth inertial state at sample `i`.
    pub fn true_state(&self, traj: &Trajectory, i: usize) -> ImuState {
        let k = traj.at(self.samples[i].t);
        ImuState {
            pose: k.pose(),
            vel: k.vel,
            bg: self.gyro_bias[i],
            ba: self.accel_bias[i],
        }
    }
}

pub(crate) fn gaussian3(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::from_fn(|_, _| StandardNormal.sample(rng))
}

/// Number of samples `round(duration * rate) + 1` taken at `i / rate`.
pub fn sample_count(duration: f64, rate: f64) -> usize {
    (duration * rate).round() as usize + 1
}

/// Gyro = body rate + bias + white noise; accel = body-frame specific
/// force + bias + white noise. Biases start at zero and follow random walks. With
/// `noisy == false` the output is the exact kinematics.
pub fn simulate_imu(traj: &Trajectory, spec: &ImuSpec, seed: u64, noisy: bool) -> ImuData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let n = sample_count(traj.duration(), spec.rate);
    let dt = 1.0 / spec.rate;
    let g = spec.gravity();
    let nz = &spec.noise;
    let (sg, sa) = (nz.gyro_white * spec.rate.sqrt(), nz.accel_white * spec.rate.sqrt());
    let (wg, wa) = (nz.gyro_walk * dt.sqrt(), nz.accel_walk * dt.sqrt());
    let mut out = ImuData::default();
    let (mut bg, mut ba) = (Vector3::zeros(), Vector3::zeros());
    for i in 0..n {
        let t = i as f64 / spec.rate;
        let k = traj.at(t);
        let mut gyro = k.omega;
        let mut accel = k.rot.inverse() * (k.acc - g);
        if noisy {
            gyro += bg + sg * gaussian3(&mut rng);
            accel += ba + sa * gaussian3(&mut rng);
        }
        out.samples.push(ImuSample { t, gyro, accel });
        out.gyro_bias.push(bg);
        out.accel_bias.push(ba);
        if noisy {
            bg += wg * gaussian3(&mut rng);
            ba += wa * gaussian3(&mut rng);
        }
    }
    out
}
