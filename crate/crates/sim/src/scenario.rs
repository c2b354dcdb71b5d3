//! Scenario description and the full simulation of one Monte-Carlo run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use spins_core::estimator::MeasurementFrame;
use spins_core::factors::ImuSample;
use spins_core::geometry::ImuState;

use crate::error::{Result, SimError};
use crate::imu::{simulate_imu, ImuData, ImuSpec};
use crate::measure::{simulate_measurements, FeatureNoise, Fov};
use crate::trajectory::{generate_trajectory, Trajectory, TrajectorySpec};
use crate::world::{generate_world, World, WorldSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub world: WorldSpec,
    pub trajectory: TrajectorySpec,
    pub imu: ImuSpec,
    /// Feature frame rate, Hz. Must divide the IMU rate.
    pub frame_rate: f64,
    pub fov: Fov,
    pub feature_noise: FeatureNoise,
    /// Switch all sensor noise and bias drift on or off.
    pub noise: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            world: WorldSpec::default(),
            trajectory: TrajectorySpec::default(),
            imu: ImuSpec::default(),
            frame_rate: 10.0,
            fov: Fov::default(),
            feature_noise: FeatureNoise::default(),
            noise: true,
        }
    }
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let s: Scenario = serde_json::from_str(&text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        let ratio = self.imu.rate / self.frame_rate;
        if !(self.frame_rate > 0.0) || ratio.fract() != 0.0 || ratio < 2.0 {
            return Err(SimError::InvalidScenario(format!(
                "IMU rate {} must be an integer multiple (>= 2) of the frame rate {}",
                self.imu.rate, self.frame_rate
            )));
        }
        let n = &self.imu.noise;
        let f = &self.feature_noise;
        let all = [n.gyro_white, n.accel_white, n.gyro_walk, n.accel_walk, f.point, f.line, f.plane];
        if all.iter().any(|x| !(*x >= 0.0)) {
            return Err(SimError::InvalidScenario("noise densities must be non-negative".into()));
        }
        if !(self.fov.range > 0.0) || !(self.fov.half_angle_deg > 0.0) {
            return Err(SimError::InvalidScenario("field of view must be positive".into()));
        }
        Ok(())
    }

    pub fn samples_per_frame(&self) -> usize {
        (self.imu.rate / self.frame_rate).round() as usize
    }

    pub fn build_world(&self) -> Result<World> {
        generate_world(&self.world)
    }

    pub fn build_trajectory(&self) -> Result<Trajectory> {
        generate_trajectory(&self.trajectory, Some(self.world.half_extents()))
    }
}

/// One simulated run: sensor streams plus ground truth at every frame.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub imu: ImuData,
    pub frames: Vec<MeasurementFrame>,
    pub truth: Vec<ImuState>,
    pub samples_per_frame: usize,
}

impl Simulation {
    /// IMU samples from frame `k - 1` to frame `k`, both included.
    pub fn imu_into(&self, k: usize) -> &[ImuSample] {
        let s = self.samples_per_frame;
        &self.imu.samples[(k - 1) * s..=k * s]
    }
}

/// Simulate sensor data for `seed` in a pre-built world and trajectory.
pub fn simulate(scenario: &Scenario, world: &World, traj: &Trajectory, seed: u64) -> Simulation {
    let imu = simulate_imu(traj, &scenario.imu, seed, scenario.noise);
    let frames = simulate_measurements(
        traj,
        world,
        &scenario.fov,
        &scenario.feature_noise,
        scenario.frame_rate,
        seed,
        scenario.noise,
    );
    let spf = scenario.samples_per_frame();
    let truth = (0..frames.len())
        .map(|k| imu.true_state(traj, k * spf))
        .collect();
    Simulation {
        imu,
        frames,
        truth,
        samples_per_frame: spf,
    }
}
