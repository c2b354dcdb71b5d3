use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::graph::FactorGraph;
use super::normal::{build_normal_equations, evaluate_cost, lm_step};
use crate::error::{Error, Result};
use crate::state::SlidingWindowState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub lambda_init: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub lambda_max: f64,
    /// Stop when the step norm drops below this.
    pub step_tol: f64,
    /// Stop when the relative cost decrease drops below this.
    pub cost_tol: f64,
    pub huber_delta: f64,
    /// Window length in frames.
    pub window: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            lambda_init: 1e-4,
            lambda_up: 10.0,
            lambda_down: 2.0,
            lambda_max: 1e10,
            step_tol: 1e-8,
            cost_tol: 1e-6,
            huber_delta: 1.345,
            window: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.lambda_init,
            self.lambda_up,
            self.lambda_down,
            self.lambda_max,
            self.step_tol,
            self.cost_tol,
            self.huber_delta,
        ];
        if self.max_iterations == 0 || positive.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::InvalidConfig("solver parameters must be positive".into()));
        }
        if self.window < 2 {
            return Err(Error::InvalidConfig("window must hold at least two frames".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverStatus {
    Converged,
    MaxIterations,
    /// No cost decrease was found even at the largest damping.
    Diverged,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: SolverStatus,
    pub iterations: usize,
    /// Cost before the first iteration followed by every accepted cost.
    pub cost_trace: Vec<f64>,
    /// Wall time of each iteration in seconds.
    pub iteration_times: Vec<f64>,
    pub skipped_factors: usize,
    pub final_lambda: f64,
}

impl SolverReport {
    pub fn final_cost(&self) -> f64 {
        *self.cost_trace.last().unwrap()
    }
}

/// Levenberg-Marquardt with multiplicative damping updates. Always returns
/// the best state found.
pub fn optimize(
    graph: &FactorGraph,
    x0: &SlidingWindowState,
    cfg: &SolverConfig,
) -> (SlidingWindowState, SolverReport) {
    let mut x = x0.clone();
    let mut lambda = cfg.lambda_init;
    let mut ne = build_normal_equations(graph, &x, cfg.huber_delta);
    let mut report = SolverReport {
        status: SolverStatus::MaxIterations,
        iterations: 0,
        cost_trace: vec![ne.cost],
        iteration_times: Vec::new(),
        skipped_factors: ne.skipped,
        final_lambda: lambda,
    };
    let mut cost = ne.cost;
    if ne.layout.dim() == 0 {
        report.status = SolverStatus::Converged;
        return (x, report);
    }

    'outer: for _ in 0..cfg.max_iterations {
        let started = Instant::now();
        report.iterations += 1;
        loop {
            let step = match lm_step(&ne, lambda) {
                Ok(s) => s,
                Err(_) => {
                    lambda *= cfg.lambda_up;
                    if lambda > cfg.lambda_max {
                        report.status = SolverStatus::Diverged;
                        report.iteration_times.push(started.elapsed().as_secs_f64());
                        break 'outer;
                    }
                    continue;
                }
            };
            let step_norm = step.norm();
            if step_norm < cfg.step_tol {
                report.status = SolverStatus::Converged;
                report.iteration_times.push(started.elapsed().as_secs_f64());
                break 'outer;
            }
            let candidate = x.boxplus(&step);
            let new_cost = evaluate_cost(graph, &candidate, cfg.huber_delta);
            if new_cost.is_finite() && new_cost < cost {
                let decrease = cost - new_cost;
                x = candidate;
                cost = new_cost;
                report.cost_trace.push(cost);
                lambda = (lambda / cfg.lambda_down).max(1e-12);
                if decrease <= cfg.cost_tol * cost.max(f64::MIN_POSITIVE) {
                    report.status = SolverStatus::Converged;
                    report.iteration_times.push(started.elapsed().as_secs_f64());
                    break 'outer;
                }
                ne = build_normal_equations(graph, &x, cfg.huber_delta);
                report.skipped_factors = ne.skipped;
                break;
            }
            lambda *= cfg.lambda_up;
            if lambda > cfg.lambda_max {
                report.status = SolverStatus::Diverged;
                report.iteration_times.push(started.elapsed().as_secs_f64());
                break 'outer;
            }
        }
        report.iteration_times.push(started.elapsed().as_secs_f64());
    }
    report.final_lambda = lambda;
    (x, report)
}
