//! Strategy × seed experiment matrices and their output files.
//!
//! Every run gets its own directory `runs/<strategy>_seed<seed>/` with
//!
//! * `events.jsonl`: the event log;
//! * `metrics.csv`: header plus one results row;
//! * `timeseries.csv`: cumulative realized reward every sample interval;
//! * `timing.csv`: solver wall-clock statistics.
//!
//! Everything except `timing.csv` is a pure function of configuration and
//! seed. The experiment root additionally holds `metrics.csv` with all runs,
//! `summary.csv` with per-strategy means and `config.toml` echoing the
//! effective configuration.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{SimConfig, StrategyTag};
use crate::network::RoadNetwork;
use crate::planner::MilpBackend;
use crate::sim::{run_simulation, time_series_csv, RunMetrics, RunOptions, SimError, SimOutput};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub base: SimConfig,
    pub strategies: Vec<StrategyTag>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub parallel: bool,
    /// Also write every solver model of every run in LP format.
    pub dump_models: bool,
}

/// Outcome of one (strategy, seed) run.
#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub strategy: StrategyTag,
    pub seed: u64,
    pub dir: PathBuf,
    pub metrics: Option<RunMetrics>,
    pub error: Option<String>,
}

/// Per-strategy means over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub strategy: StrategyTag,
    pub runs: usize,
    pub total_info_gain: f64,
    pub spatial_coverage_pct: f64,
    pub avg_aoi_pct: f64,
    pub avg_delivery_delay_pct: f64,
    pub milp_calls: f64,
    pub avg_cpu_time_s: f64,
}

impl AggregateRow {
    pub const CSV_HEADER: &'static str = "strategy,runs,total_info_gain,spatial_coverage_pct,avg_aoi_pct,avg_delivery_delay_pct,milp_calls,avg_cpu_time_s";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.strategy,
            self.runs,
            self.total_info_gain,
            self.spatial_coverage_pct,
            self.avg_aoi_pct,
            self.avg_delivery_delay_pct,
            self.milp_calls,
            self.avg_cpu_time_s
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub runs: Vec<RunOutcome>,
    pub summary: Vec<AggregateRow>,
}

impl ExperimentReport {
    pub fn failures(&self) -> impl Iterator<Item = &RunOutcome> {
        self.runs.iter().filter(|r| r.error.is_some())
    }
}

/// Means per strategy, in the order strategies first appear in `rows`.
pub fn aggregate(rows: &[RunMetrics]) -> Vec<AggregateRow> {
    let mut order: Vec<StrategyTag> = Vec::new();
    for r in rows {
        if !order.contains(&r.strategy) {
            order.push(r.strategy);
        }
    }
    order
        .into_iter()
        .map(|tag| {
            let group: Vec<&RunMetrics> = rows.iter().filter(|r| r.strategy == tag).collect();
            let n = group.len() as f64;
            let mean = |f: fn(&RunMetrics) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
            AggregateRow {
                strategy: tag,
                runs: group.len(),
                total_info_gain: mean(|r| r.total_info_gain),
                spatial_coverage_pct: mean(|r| r.spatial_coverage_pct),
                avg_aoi_pct: mean(|r| r.avg_aoi_pct),
                avg_delivery_delay_pct: mean(|r| r.avg_delivery_delay_pct),
                milp_calls: mean(|r| r.milp_calls as f64),
                avg_cpu_time_s: mean(|r| r.avg_cpu_time_s),
            }
        })
        .collect()
}

pub fn run_dir_name(strategy: StrategyTag, seed: u64) -> String {
    format!("{strategy}_seed{seed}")
}

/// Writes the per-run files described in the module docs into `dir`.
pub fn write_run_outputs(dir: &Path, output: &SimOutput) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let write = |name: &str, content: &[u8]| {
        let path = dir.join(name);
        fs::write(&path, content).map_err(io_err(&path))
    };
    write("events.jsonl", output.log.to_jsonl().as_bytes())?;
    write(
        "metrics.csv",
        format!("{}\n{}\n", RunMetrics::CSV_HEADER, output.metrics.csv_row()).as_bytes(),
    )?;
    write("timeseries.csv", time_series_csv(&output.time_series).as_bytes())?;
    let calls = &output.ledger.solver_calls;
    let mut timing = String::from("milp_calls,total_cpu_time_s,avg_cpu_time_s,max_cpu_time_s\n");
    let total = calls.iter().fold(0.0, |acc, c| acc + c.seconds);
    let max = calls.iter().map(|c| c.seconds).fold(0.0, f64::max);
    let _ = writeln!(
        timing,
        "{},{},{},{}",
        calls.len(),
        total,
        output.ledger.mean_solve_seconds(),
        max
    );
    write("timing.csv", timing.as_bytes())?;
    Ok(())
}

/// Runs one configuration and writes its files into `dir`.
pub fn run_single(
    cfg: &SimConfig,
    network: &RoadNetwork,
    backend: &dyn MilpBackend,
    dir: &Path,
    dump_models: bool,
) -> Result<SimOutput, ExperimentError> {
    let mut options = RunOptions::default();
    if dump_models {
        let models = dir.join("models");
        fs::create_dir_all(&models).map_err(io_err(&models))?;
        options.model_dump = Some(models);
    }
    let output = run_simulation(cfg, network, backend, options)?;
    write_run_outputs(dir, &output)?;
    Ok(output)
}

/// Runs every (strategy, seed) pair. A failing run is reported in its
/// outcome and does not stop the others; the summary covers the runs that
/// succeeded.
pub fn run_experiment(spec: &ExperimentSpec, backend: &dyn MilpBackend) -> Result<ExperimentReport, ExperimentError> {
    let root = &spec.output_dir;
    fs::create_dir_all(root).map_err(io_err(root))?;
    let cfg_path = root.join("config.toml");
    fs::write(&cfg_path, spec.base.to_toml()).map_err(io_err(&cfg_path))?;
    let network = spec.base.build_network().map_err(SimError::from)?;

    let jobs: Vec<(StrategyTag, u64)> = spec
        .strategies
        .iter()
        .flat_map(|&s| spec.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let run_one = |&(strategy, seed): &(StrategyTag, u64)| {
        let mut cfg = spec.base.clone();
        cfg.strategy = strategy;
        cfg.seed = seed;
        let dir = root.join("runs").join(run_dir_name(strategy, seed));
        let result = run_single(&cfg, &network, backend, &dir, spec.dump_models);
        if let Err(e) = &result {
            log::error!("{strategy} seed {seed}: {e}");
        }
        RunOutcome {
            strategy,
            seed,
            dir,
            metrics: result.as_ref().ok().map(|o| o.metrics.clone()),
            error: result.err().map(|e| e.to_string()),
        }
    };
    let runs: Vec<RunOutcome> = if spec.parallel {
        jobs.par_iter().map(run_one).collect()
    } else {
        jobs.iter().map(run_one).collect()
    };

    let rows: Vec<RunMetrics> = runs.iter().filter_map(|r| r.metrics.clone()).collect();
    let mut all = format!("{}\n", RunMetrics::CSV_HEADER);
    for r in &rows {
        let _ = writeln!(all, "{}", r.csv_row());
    }
    let all_path = root.join("metrics.csv");
    fs::write(&all_path, all).map_err(io_err(&all_path))?;

    let summary = aggregate(&rows);
    let mut text = format!("{}\n", AggregateRow::CSV_HEADER);
    for row in &summary {
        let _ = writeln!(text, "{}", row.csv_row());
    }
    let summary_path = root.join("summary.csv");
    fs::write(&summary_path, text).map_err(io_err(&summary_path))?;
    Ok(ExperimentReport { runs, summary })
}
