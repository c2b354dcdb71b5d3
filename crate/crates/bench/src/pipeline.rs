//! One simulate -> estimate -> evaluate run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use spins_core::estimator::{Estimator, EstimatorConfig};
use spins_core::solver::{FactorFamily, SolverConfig, SolverStatus};
use spins_sim::scenario::Simulation;
use spins_sim::{evaluate_rmse, Scenario, World};

use crate::error::BenchError;
use crate::strategy::Strategy;

pub const FAMILIES: [FactorFamily; 6] = [
    FactorFamily::Prior,
    FactorFamily::Imu,
    FactorFamily::Point,
    FactorFamily::Line,
    FactorFamily::Plane,
    FactorFamily::Structure,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub strategy: Strategy,
    pub seed: u64,
    pub trans_rmse: f64,
    pub rot_rmse: f64,
    pub frames: usize,
    pub iterations: usize,
    /// Frames whose optimization ended without a cost decrease.
    pub diverged_frames: usize,
    /// Mean number of factors per window for each family.
    pub mean_factors: BTreeMap<FactorFamily, f64>,
    /// Largest number of structure factors in any window.
    pub max_structure: usize,
    /// Frames whose greedy gains were not diminishing.
    pub gain_violations: usize,
    /// Wall time per optimizer iteration, seconds. Not deterministic.
    #[serde(skip)]
    pub mean_iteration_time: f64,
}

pub fn estimator_config(scenario: &Scenario, strategy: Strategy, seed: u64, solver: &SolverConfig) -> EstimatorConfig {
    EstimatorConfig {
        solver: solver.clone(),
        families: strategy.families(),
        priors: strategy.policy(seed),
        imu_noise: scenario.imu.noise,
        gravity: scenario.imu.gravity(),
        ..Default::default()
    }
}

/// Run the estimator over a simulated stream. The estimator always weights
/// with the nominal noise model, even when the simulation is noise free.
pub fn run_once(
    scenario: &Scenario,
    world: &World,
    sim: &Simulation,
    strategy: Strategy,
    seed: u64,
    solver: &SolverConfig,
) -> Result<RunResult, BenchError> {
    strategy.check()?;
    let mut cfg = estimator_config(scenario, strategy, seed, solver);
    if !scenario.noise {
        // keep the information matrices regular
        cfg.imu_noise = spins_core::factors::ImuNoise::default();
    }
    let db = strategy.uses_priors().then(|| world.priors.clone());
    let mut est = Estimator::new(cfg, db, 0, sim.truth[0]).map_err(|e| match e {
        spins_core::Error::InvalidConfig(m) => BenchError::Refused(m),
        e => e.into(),
    })?;

    let mut totals: BTreeMap<FactorFamily, usize> = BTreeMap::new();
    let mut max_structure = 0;
    let mut iterations = 0;
    let mut time = 0.0;
    let mut diverged = 0;
    let mut violations = 0;
    let n = sim.frames.len();
    for k in 1..n {
        let rep = est
            .step(sim.imu_into(k), &sim.frames[k])
            .map_err(|e| match e {
                spins_core::Error::InvalidConfig(m) => BenchError::Refused(m),
                e => e.into(),
            })?;
        let window: usize = rep.factor_counts.values().sum();
        debug_assert!(window > 0);
        log::debug!("{strategy} seed {seed} frame {k}: {:?}", rep.factor_counts);
        for (f, c) in &rep.factor_counts {
            *totals.entry(*f).or_insert(0) += c;
        }
        max_structure = max_structure.max(*rep.factor_counts.get(&FactorFamily::Structure).unwrap_or(&0));
        iterations += rep.iterations;
        time += rep.iteration_times.iter().sum::<f64>();
        if rep.status == SolverStatus::Diverged {
            diverged += 1;
        }
        if !rep.diminishing {
            violations += 1;
        }
    }

    let traj = est.trajectory();
    let estimate: Vec<_> = traj.iter().map(|(k, s)| (sim.frames[*k as usize].t, s.pose)).collect();
    let truth: Vec<_> = traj
        .iter()
        .map(|(k, _)| (sim.frames[*k as usize].t, sim.truth[*k as usize].pose))
        .collect();
    let rmse = evaluate_rmse(&estimate, &truth)?;
    let windows = (n - 1).max(1) as f64;
    Ok(RunResult {
        strategy,
        seed,
        trans_rmse: rmse.trans,
        rot_rmse: rmse.rot,
        frames: n,
        iterations,
        diverged_frames: diverged,
        mean_factors: FAMILIES
            .iter()
            .map(|f| (*f, *totals.get(f).unwrap_or(&0) as f64 / windows))
            .collect(),
        max_structure,
        gain_violations: violations,
        mean_iteration_time: if iterations > 0 { time / iterations as f64 } else { 0.0 },
    })
}
