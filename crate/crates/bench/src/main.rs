use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spins_bench::experiment::worker_count;
use spins_bench::strategy::DEFAULT_BUDGET;
use spins_bench::{emit_tables, run_experiment, BenchError, ExperimentConfig, ExperimentReport, Strategy};
use spins_sim::dump::{write_trajectory_csv, write_world_csv};
use spins_sim::{simulate, Scenario};

#[derive(Parser)]
#[command(name = "spins", version, about = "Monte-Carlo comparison of feature and structure-prior strategies")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate and estimate every (seed, strategy) pair and write the report.
    Run {
        /// Scenario JSON; missing fields take their defaults.
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated, e.g. P_INS,PL_INS,SPINS_RAND(20),SPINS_ALL
        #[arg(long, default_value = "P_INS,PL_INS,PLP_INS,SPINS_RAND,SPINS_APPROX,SPINS_ALL")]
        strategies: String,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long)]
        out: PathBuf,
        /// Budget for strategies named without one.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        #[arg(long, default_value_t = 1)]
        first_seed: u64,
        /// Also sweep the greedy prior budget over 0, 5, 10, 20, 40 and all.
        #[arg(long)]
        sweep: bool,
    },
    /// Print the table of an existing report directory.
    Table {
        #[arg(long)]
        report: PathBuf,
    },
    /// Write the world and the ground-truth frame poses of one seed as CSV.
    Dump {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.cmd {
        Cmd::Run {
            scenario,
            strategies,
            runs,
            out,
            budget,
            first_seed,
            sweep,
        } => {
            let scenario = Scenario::load(&scenario)?;
            let strategies = Strategy::parse_list(&strategies, budget)?;
            let mut cfg = ExperimentConfig::new(scenario, strategies, runs);
            cfg.first_seed = first_seed;
            cfg.sweep = sweep;
            let workers = worker_count();
            log::info!("{} runs x {} strategies on {workers} workers", runs, cfg.strategies.len());
            let report = run_experiment(&cfg, workers)?;
            report.write(&out, &cfg)?;
            print!("{}", emit_tables(&report, &out)?);
        }
        Cmd::Table { report } => {
            let rep = ExperimentReport::load(&report)?;
            print!("{}", emit_tables(&rep, &report)?);
        }
        Cmd::Dump { scenario, seed, out } => {
            let scenario = Scenario::load(&scenario)?;
            let world = scenario.build_world()?;
            let traj = scenario.build_trajectory()?;
            let sim = simulate(&scenario, &world, &traj, seed);
            std::fs::create_dir_all(&out)?;
            write_world_csv(File::create(out.join("world.csv"))?, &world)?;
            let poses: Vec<_> = sim.frames.iter().zip(&sim.truth).map(|(f, s)| (f.t, s.pose)).collect();
            write_trajectory_csv(File::create(out.join("truth.csv"))?, &poses)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ BenchError::Refused(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
