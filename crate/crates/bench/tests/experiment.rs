use std::path::Path;
use std::process::Command;

use spins_bench::experiment::{read_csv, RunRow, SWEEP_BUDGETS};
use spins_bench::{emit_tables, format_table, run_experiment, ExperimentConfig, ExperimentReport, Strategy};
use spins_sim::trajectory::TrajectorySpec;
use spins_sim::Scenario;

fn short() -> Scenario {
    Scenario {
        trajectory: TrajectorySpec {
            duration: 6.0,
            ..TrajectorySpec::default()
        },
        ..Scenario::default()
    }
}

fn spins() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spins"))
}

fn write_scenario(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("scenario.json");
    std::fs::write(&path, serde_json::to_string_pretty(&short()).unwrap()).unwrap();
    path
}

#[test]
fn single_run_is_deterministic() {
    let cfg = ExperimentConfig::new(short(), vec![Strategy::PIns], 1);
    let a = run_experiment(&cfg, 1).unwrap();
    let b = run_experiment(&cfg, 2).unwrap();
    assert_eq!(a.runs.len(), 1);
    assert!(a.runs[0].is_ok());
    assert_eq!(format!("{:?}", a.runs), format!("{:?}", b.runs));
}

#[test]
fn random_budget_caps_structure_factors_per_window() {
    let cfg = ExperimentConfig::new(short(), vec![Strategy::SpinsRand(20), Strategy::SpinsRand(3), Strategy::SpinsAll], 2);
    let rep = run_experiment(&cfg, 2).unwrap();
    for r in &rep.runs {
        assert!(r.is_ok(), "{}", r.status);
        match r.strategy.as_str() {
            "SPINS_RAND(20)" => assert!(r.max_structure <= 20),
            "SPINS_RAND(3)" => assert!(r.max_structure <= 3 && r.max_structure > 0),
            _ => assert!(r.max_structure > 0),
        }
    }
}

#[test]
fn aggregate_matches_per_run_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::new(short(), vec![Strategy::PIns, Strategy::PlpIns], 3);
    let rep = run_experiment(&cfg, 2).unwrap();
    rep.write(dir.path(), &cfg).unwrap();
    let rows: Vec<RunRow> = read_csv(&dir.path().join("runs.csv")).unwrap();
    assert_eq!(rows.len(), 6);
    for agg in rep.aggregate() {
        let mine: Vec<&RunRow> = rows.iter().filter(|r| r.strategy == agg.strategy).collect();
        let n = mine.len() as f64;
        let t = mine.iter().map(|r| r.trans_rmse).sum::<f64>() / n;
        let r = mine.iter().map(|r| r.rot_rmse_deg).sum::<f64>() / n;
        assert!((t - agg.trans_rmse_mean).abs() <= 1e-12);
        assert!((r - agg.rot_rmse_deg_mean).abs() <= 1e-12);
    }
    let loaded = ExperimentReport::load(dir.path()).unwrap();
    assert_eq!(format_table(&loaded), format_table(&rep));
}

#[test]
fn one_row_table() {
    let cfg = ExperimentConfig::new(short(), vec![Strategy::PIns], 1);
    let rep = run_experiment(&cfg, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let table = emit_tables(&rep, dir.path()).unwrap();
    let lines: Vec<&str> = table.lines().filter(|l| !l.trim().is_empty()).collect();
    assert!(lines[0].contains("Trans. Err. [m]") && lines[0].contains("Time per iter [s]"));
    assert_eq!(lines.iter().filter(|l| l.starts_with("P_INS")).count(), 1);
    assert!(dir.path().join("table.txt").exists());
    assert!(emit_tables(&ExperimentReport::default(), dir.path()).is_err());
}

#[test]
fn sweep_covers_every_budget() {
    let mut cfg = ExperimentConfig::new(short(), vec![Strategy::PIns], 1);
    cfg.sweep = true;
    let rep = run_experiment(&cfg, 2).unwrap();
    assert_eq!(rep.sweep.len(), SWEEP_BUDGETS.len());
    assert_eq!(rep.sweep[0].structure_factors, 0.0);
    assert!(rep.sweep.iter().all(|r| r.status == "ok"));
}

#[test]
fn cli_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path());
    let outs = ["a", "b"].map(|n| dir.path().join(n));
    for out in &outs {
        let st = spins()
            .args(["run", "--scenario"])
            .arg(&scenario)
            .args(["--strategies", "P_INS,SPINS_RAND(5),SPINS_APPROX(5)", "--runs", "2", "--out"])
            .arg(out)
            .env("SPINS_WORKERS", "2")
            .output()
            .unwrap();
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    }
    for f in ["runs.csv", "aggregate.csv", "metadata.json"] {
        let a = std::fs::read(outs[0].join(f)).unwrap();
        let b = std::fs::read(outs[1].join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let table = spins().args(["table", "--report"]).arg(&outs[0]).output().unwrap();
    assert!(table.status.success());
    assert!(String::from_utf8_lossy(&table.stdout).contains("SPINS_APPROX(5)"));
}

#[test]
fn cli_refuses_oversized_exhaustive_budget() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path());
    let out = spins()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .args(["--strategies", "SPINS_OPT(5)", "--runs", "1", "--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("SPINS_OPT(5)"));
    let bad = spins()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .args(["--strategies", "NOPE", "--runs", "1", "--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!bad.status.success());
}

#[test]
fn cli_dumps_world_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path());
    let out = dir.path().join("dump");
    let st = spins().args(["dump", "--scenario"]).arg(&scenario).arg("--out").arg(&out).output().unwrap();
    assert!(st.status.success());
    let truth = std::fs::read_to_string(out.join("truth.csv")).unwrap();
    assert!(truth.starts_with("t,x,y,z,qw,qx,qy,qz\n"));
    assert_eq!(truth.lines().count(), 1 + 61);
    let world = std::fs::read_to_string(out.join("world.csv")).unwrap();
    assert_eq!(world.lines().count(), 1 + 40 + 15 + 15);
}

#[test]
fn shipped_scenario_is_the_default() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/default.json");
    assert_eq!(Scenario::load(path).unwrap(), Scenario::default());
}
