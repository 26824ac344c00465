use std::fs;

use dualtask::config::{NetworkSource, SimConfig, StrategyTag};
use dualtask::experiment::{run_dir_name, run_experiment, AggregateRow, ExperimentSpec};
use dualtask::planner::HighsBackend;
use dualtask::sim::RunMetrics;

fn base() -> SimConfig {
    SimConfig {
        network: NetworkSource::Grid {
            size: 4,
            spacing: 100.0,
            beta_min: 0.005,
            beta_max: 0.02,
            seed: 1,
        },
        drones: 2,
        max_parcels: Some(5),
        horizon: 600.0,
        ..SimConfig::default()
    }
}

fn spec(dir: &std::path::Path) -> ExperimentSpec {
    ExperimentSpec {
        base: base(),
        strategies: StrategyTag::ALL.to_vec(),
        seeds: vec![1, 2, 3],
        output_dir: dir.to_path_buf(),
        parallel: false,
        dump_models: false,
    }
}

#[test]
fn matrix_produces_twelve_runs_and_four_rows() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&spec(dir.path()), &HighsBackend).unwrap();
    assert_eq!(report.runs.len(), 12);
    assert_eq!(report.failures().count(), 0);
    assert_eq!(report.summary.len(), 4);
    assert!(report.summary.iter().all(|r| r.runs == 3));

    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], AggregateRow::CSV_HEADER);
    assert_eq!(lines.len(), 5);
    let all = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(all.lines().next(), Some(RunMetrics::CSV_HEADER));
    assert_eq!(all.lines().count(), 13);
    assert!(dir.path().join("config.toml").is_file());
    for tag in StrategyTag::ALL {
        for seed in [1, 2, 3] {
            let run = dir.path().join("runs").join(run_dir_name(tag, seed));
            for file in ["events.jsonl", "metrics.csv", "timeseries.csv", "timing.csv"] {
                assert!(run.join(file).is_file(), "{}", run.join(file).display());
            }
        }
    }

    // summary means agree with the per-run rows
    let shortest: Vec<f64> = report
        .runs
        .iter()
        .filter(|r| r.strategy == StrategyTag::Shortest)
        .map(|r| r.metrics.as_ref().unwrap().total_info_gain)
        .collect();
    let mean = shortest.iter().sum::<f64>() / 3.0;
    let row = report
        .summary
        .iter()
        .find(|r| r.strategy == StrategyTag::Shortest)
        .unwrap();
    assert!((row.total_info_gain - mean).abs() < 1e-9 * (1.0 + mean));
}

#[test]
fn failed_run_keeps_the_others() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    fs::create_dir_all(&runs).unwrap();
    // a plain file where the run directory should go
    fs::write(runs.join(run_dir_name(StrategyTag::Distributed, 2)), "blocked").unwrap();
    let report = run_experiment(&spec(dir.path()), &HighsBackend).unwrap();
    let failed: Vec<_> = report.failures().collect();
    assert_eq!(failed.len(), 1);
    assert_eq!((failed[0].strategy, failed[0].seed), (StrategyTag::Distributed, 2));
    assert_eq!(report.runs.iter().filter(|r| r.metrics.is_some()).count(), 11);
    let distributed = report
        .summary
        .iter()
        .find(|r| r.strategy == StrategyTag::Distributed)
        .unwrap();
    assert_eq!(distributed.runs, 2);
    let all = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(all.lines().count(), 12);
}
