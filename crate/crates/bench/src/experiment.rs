//! Monte-Carlo experiments: every (seed, strategy) pair on a worker pool,
//! results gathered and sorted before anything is written.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use spins_core::solver::{FactorFamily, SolverConfig};
use spins_sim::{simulate, Scenario};

use crate::error::BenchError;
use crate::pipeline::{run_once, RunResult};
use crate::strategy::Strategy;

/// Worker count override.
pub const WORKERS_ENV: &str = "SPINS_WORKERS";

/// Prior budgets of the sweep; `None` stands for all associated priors.
pub const SWEEP_BUDGETS: [Option<usize>; 6] = [Some(0), Some(5), Some(10), Some(20), Some(40), None];

pub const BUDGET_NOTE: &str = "prior budgets apply per sliding window: a budgeted strategy admits new \
structure factors only while fewer than k are active in the window";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub strategies: Vec<Strategy>,
    pub runs: usize,
    pub first_seed: u64,
    pub solver: SolverConfig,
    pub sweep: bool,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario, strategies: Vec<Strategy>, runs: usize) -> Self {
        Self {
            scenario,
            strategies,
            runs,
            first_seed: 1,
            solver: SolverConfig::default(),
            sweep: false,
        }
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.runs as u64).map(move |i| self.first_seed + i)
    }
}

/// One row of runs.csv. Failed runs keep their row with NaN metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub strategy: String,
    pub seed: u64,
    pub status: String,
    pub trans_rmse: f64,
    pub rot_rmse_deg: f64,
    pub frames: usize,
    pub iterations: usize,
    pub diverged_frames: usize,
    pub prior_factors: f64,
    pub imu_factors: f64,
    pub point_factors: f64,
    pub line_factors: f64,
    pub plane_factors: f64,
    pub structure_factors: f64,
    pub max_structure: usize,
    pub gain_violations: usize,
}

impl RunRow {
    fn ok(r: &RunResult) -> Self {
        let f = |fam| r.mean_factors.get(&fam).copied().unwrap_or(0.0);
        Self {
            strategy: r.strategy.to_string(),
            seed: r.seed,
            status: "ok".into(),
            trans_rmse: r.trans_rmse,
            rot_rmse_deg: r.rot_rmse,
            frames: r.frames,
            iterations: r.iterations,
            diverged_frames: r.diverged_frames,
            prior_factors: f(FactorFamily::Prior),
            imu_factors: f(FactorFamily::Imu),
            point_factors: f(FactorFamily::Point),
            line_factors: f(FactorFamily::Line),
            plane_factors: f(FactorFamily::Plane),
            structure_factors: f(FactorFamily::Structure),
            max_structure: r.max_structure,
            gain_violations: r.gain_violations,
        }
    }

    fn failed(strategy: Strategy, seed: u64, why: &str) -> Self {
        log::warn!("{strategy} seed {seed} failed: {why}");
        Self {
            strategy: strategy.to_string(),
            seed,
            status: format!("failed: {why}"),
            trans_rmse: f64::NAN,
            rot_rmse_deg: f64::NAN,
            frames: 0,
            iterations: 0,
            diverged_frames: 0,
            prior_factors: f64::NAN,
            imu_factors: f64::NAN,
            point_factors: f64::NAN,
            line_factors: f64::NAN,
            plane_factors: f64::NAN,
            structure_factors: f64::NAN,
            max_structure: 0,
            gain_violations: 0,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Wall-clock rows, kept apart from the reproducible outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub strategy: String,
    pub seed: u64,
    pub iterations: usize,
    pub mean_iteration_time_s: f64,
}

/// One row of aggregate.csv: arithmetic means and population standard
/// deviations over the successful runs of a strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub strategy: String,
    pub runs: usize,
    pub failed: usize,
    pub trans_rmse_mean: f64,
    pub trans_rmse_std: f64,
    pub rot_rmse_deg_mean: f64,
    pub rot_rmse_deg_std: f64,
    pub structure_factors_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Prior budget, or "all".
    pub budget: String,
    pub seed: u64,
    pub status: String,
    pub trans_rmse: f64,
    pub rot_rmse_deg: f64,
    pub structure_factors: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTimingRow {
    pub budget: String,
    pub seed: u64,
    pub mean_iteration_time_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentReport {
    pub runs: Vec<RunRow>,
    pub timings: Vec<TimingRow>,
    pub sweep: Vec<SweepRow>,
    pub sweep_timings: Vec<SweepTimingRow>,
}

impl ExperimentReport {
    /// Strategies in row order.
    pub fn strategies(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.runs {
            if out.last() != Some(&r.strategy) {
                out.push(r.strategy.clone());
            }
        }
        out
    }

    pub fn aggregate(&self) -> Vec<AggregateRow> {
        self.strategies()
            .into_iter()
            .map(|s| {
                let rows: Vec<&RunRow> = self.runs.iter().filter(|r| r.strategy == s).collect();
                let ok: Vec<&RunRow> = rows.iter().copied().filter(|r| r.is_ok()).collect();
                let trans: Vec<f64> = ok.iter().map(|r| r.trans_rmse).collect();
                let rot: Vec<f64> = ok.iter().map(|r| r.rot_rmse_deg).collect();
                let structure: Vec<f64> = ok.iter().map(|r| r.structure_factors).collect();
                AggregateRow {
                    strategy: s,
                    runs: ok.len(),
                    failed: rows.len() - ok.len(),
                    trans_rmse_mean: mean(&trans),
                    trans_rmse_std: std_dev(&trans),
                    rot_rmse_deg_mean: mean(&rot),
                    rot_rmse_deg_std: std_dev(&rot),
                    structure_factors_mean: mean(&structure),
                }
            })
            .collect()
    }

    /// Mean time per optimizer iteration of each strategy, seconds.
    pub fn mean_iteration_times(&self) -> BTreeMap<String, f64> {
        let mut acc: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for t in &self.timings {
            acc.entry(t.strategy.clone()).or_default().push(t.mean_iteration_time_s);
        }
        acc.into_iter().map(|(k, v)| (k, mean(&v))).collect()
    }

    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<(), BenchError> {
        std::fs::create_dir_all(dir)?;
        write_csv(&dir.join("runs.csv"), &self.runs)?;
        write_csv(&dir.join("aggregate.csv"), &self.aggregate())?;
        write_csv(&dir.join("timings.csv"), &self.timings)?;
        if !self.sweep.is_empty() {
            write_csv(&dir.join("sweep.csv"), &self.sweep)?;
            write_csv(&dir.join("sweep_timings.csv"), &self.sweep_timings)?;
        }
        let meta = serde_json::json!({
            "name": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "config": cfg,
            "seeds": cfg.seeds().collect::<Vec<_>>(),
            "budget_scope": BUDGET_NOTE,
            "reproducible_outputs": ["runs.csv", "aggregate.csv", "sweep.csv"],
            "wall_clock_outputs": ["timings.csv", "sweep_timings.csv"],
        });
        let mut f = File::create(dir.join("metadata.json"))?;
        serde_json::to_writer_pretty(&mut f, &meta)?;
        writeln!(f)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, BenchError> {
        let sweep_path = dir.join("sweep.csv");
        let (sweep, sweep_timings) = if sweep_path.exists() {
            (read_csv(&sweep_path)?, read_csv(&dir.join("sweep_timings.csv"))?)
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(Self {
            runs: read_csv(&dir.join("runs.csv"))?,
            timings: read_csv(&dir.join("timings.csv"))?,
            sweep,
            sweep_timings,
        })
    }
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, BenchError> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(BenchError::from)).collect()
}

/// Worker count from the environment, else the number of cores.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn budget_label(b: Option<usize>) -> String {
    b.map_or_else(|| "all".to_string(), |k| k.to_string())
}

/// Sweep strategy for a budget: greedy selection, or every prior.
fn sweep_strategy(b: Option<usize>) -> Strategy {
    b.map_or(Strategy::SpinsAll, Strategy::SpinsApprox)
}

enum Job {
    Run(Strategy),
    Sweep(Option<usize>),
}

pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentReport, BenchError> {
    if cfg.runs == 0 {
        return Err(BenchError::Refused("at least one run is required".into()));
    }
    if cfg.strategies.is_empty() {
        return Err(BenchError::Refused("no strategies given".into()));
    }
    for s in &cfg.strategies {
        s.check()?;
    }
    cfg.scenario.validate()?;
    cfg.solver.validate()?;
    let world = cfg.scenario.build_world()?;
    let traj = cfg.scenario.build_trajectory()?;

    let mut jobs: Vec<(u64, Job)> = Vec::new();
    for seed in cfg.seeds() {
        jobs.extend(cfg.strategies.iter().map(|s| (seed, Job::Run(*s))));
        if cfg.sweep {
            jobs.extend(SWEEP_BUDGETS.iter().map(|b| (seed, Job::Sweep(*b))));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| BenchError::Refused(format!("cannot start worker pool: {e}")))?;
    // simulations are regenerated per job; they are cheap next to estimation
    let results: Vec<(u64, &Job, Result<RunResult, BenchError>)> = pool.install(|| {
        jobs.par_iter()
            .map(|(seed, job)| {
                let strategy = match job {
                    Job::Run(s) => *s,
                    Job::Sweep(b) => sweep_strategy(*b),
                };
                let sim = simulate(&cfg.scenario, &world, &traj, *seed);
                (*seed, job, run_once(&cfg.scenario, &world, &sim, strategy, *seed, &cfg.solver))
            })
            .collect()
    });

    let mut report = ExperimentReport::default();
    let mut runs: Vec<(Strategy, RunRow, Option<TimingRow>)> = Vec::new();
    let mut sweep: Vec<(Option<usize>, SweepRow, Option<SweepTimingRow>)> = Vec::new();
    for (seed, job, res) in results {
        let res = match res {
            Err(BenchError::Refused(m)) => return Err(BenchError::Refused(m)),
            other => other,
        };
        match job {
            Job::Run(s) => match res {
                Ok(r) => runs.push((
                    *s,
                    RunRow::ok(&r),
                    Some(TimingRow {
                        strategy: s.to_string(),
                        seed,
                        iterations: r.iterations,
                        mean_iteration_time_s: r.mean_iteration_time,
                    }),
                )),
                Err(e) => runs.push((*s, RunRow::failed(*s, seed, &e.to_string()), None)),
            },
            Job::Sweep(b) => {
                let label = budget_label(*b);
                match res {
                    Ok(r) => sweep.push((
                        *b,
                        SweepRow {
                            budget: label.clone(),
                            seed,
                            status: "ok".into(),
                            trans_rmse: r.trans_rmse,
                            rot_rmse_deg: r.rot_rmse,
                            structure_factors: r.mean_factors[&FactorFamily::Structure],
                        },
                        Some(SweepTimingRow {
                            budget: label,
                            seed,
                            mean_iteration_time_s: r.mean_iteration_time,
                        }),
                    )),
                    Err(e) => sweep.push((
                        *b,
                        SweepRow {
                            budget: label,
                            seed,
                            status: format!("failed: {e}"),
                            trans_rmse: f64::NAN,
                            rot_rmse_deg: f64::NAN,
                            structure_factors: f64::NAN,
                        },
                        None,
                    )),
                }
            }
        }
    }
    runs.sort_by_key(|(s, row, _)| (*s, row.seed));
    // `None` (all priors) sorts last
    sweep.sort_by_key(|(b, row, _)| (b.is_none(), b.unwrap_or(0), row.seed));
    for (_, row, t) in runs {
        report.runs.push(row);
        report.timings.extend(t);
    }
    for (_, row, t) in sweep {
        report.sweep.push(row);
        report.sweep_timings.extend(t);
    }
    Ok(report)
}

/// Aligned text table: one row per strategy with the mean translation
/// error, rotation error and time per iteration.
pub fn format_table(report: &ExperimentReport) -> String {
    let times = report.mean_iteration_times();
    let agg = report.aggregate();
    let name_w = agg.iter().map(|a| a.strategy.len()).max().unwrap_or(0).max("Strategy".len());
    let mut out = format!(
        "{:<name_w$}  {:>5}  {:>16}  {:>16}  {:>18}\n",
        "Strategy", "Runs", "Trans. Err. [m]", "Rot. Err. [deg]", "Time per iter [s]"
    );
    for a in &agg {
        let t = times.get(&a.strategy).copied().unwrap_or(f64::NAN);
        out += &format!(
            "{:<name_w$}  {:>5}  {:>16.4}  {:>16.4}  {:>18.5}\n",
            a.strategy, a.runs, a.trans_rmse_mean, a.rot_rmse_deg_mean, t
        );
    }
    if !report.sweep.is_empty() {
        out += "\nPrior budget sweep (greedy selection)\n";
        out += &format!("{:>6}  {:>16}  {:>12}  {:>18}\n", "Budget", "Trans. Err. [m]", "Priors/win", "Time per iter [s]");
        for row in sweep_summary(report) {
            out += &format!(
                "{:>6}  {:>16.4}  {:>12.1}  {:>18.5}\n",
                row.budget, row.trans_rmse_mean, row.structure_factors_mean, row.mean_iteration_time_s
            );
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummaryRow {
    pub budget: String,
    pub trans_rmse_mean: f64,
    pub structure_factors_mean: f64,
    pub mean_iteration_time_s: f64,
}

/// Per-budget means of the sweep, in sweep order.
pub fn sweep_summary(report: &ExperimentReport) -> Vec<SweepSummaryRow> {
    let mut budgets: Vec<&str> = Vec::new();
    for r in &report.sweep {
        if budgets.last() != Some(&r.budget.as_str()) {
            budgets.push(&r.budget);
        }
    }
    budgets
        .into_iter()
        .map(|b| {
            let ok: Vec<&SweepRow> = report.sweep.iter().filter(|r| r.budget == b && r.status == "ok").collect();
            let times: Vec<f64> = report
                .sweep_timings
                .iter()
                .filter(|t| t.budget == b)
                .map(|t| t.mean_iteration_time_s)
                .collect();
            SweepSummaryRow {
                budget: b.to_string(),
                trans_rmse_mean: mean(&ok.iter().map(|r| r.trans_rmse).collect::<Vec<_>>()),
                structure_factors_mean: mean(&ok.iter().map(|r| r.structure_factors).collect::<Vec<_>>()),
                mean_iteration_time_s: mean(&times),
            }
        })
        .collect()
}

/// Write the text table and the plot data next to the CSVs.
pub fn emit_tables(report: &ExperimentReport, dir: &Path) -> Result<String, BenchError> {
    if report.runs.is_empty() {
        return Err(BenchError::Refused("empty report".into()));
    }
    let table = format_table(report);
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("table.txt"), &table)?;
    if !report.sweep.is_empty() {
        write_csv(&dir.join("sweep_summary.csv"), &sweep_summary(report))?;
    }
    Ok(table)
}
