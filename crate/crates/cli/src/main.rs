//! `dualtask`: run, batch and validate drone fleet simulations.
//!
//! Successful commands print a JSON document on stdout (except `validate`,
//! which echoes the effective configuration as TOML). Failures print a JSON
//! error object on stderr and exit nonzero.

mod chart;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use dualtask::config::{ConfigError, SimConfig, StrategyTag};
use dualtask::experiment::{run_experiment, run_single, ExperimentError, ExperimentSpec};
use dualtask::network::{generate_grid, BetaPolicy, NetworkError, RMaxPolicy};
use dualtask::planner::HighsBackend;
use dualtask::sim::SimError;

#[derive(Parser)]
#[command(
    name = "dualtask",
    version,
    about = "Delivery drones that scan the road network on the way"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one strategy on one seed.
    Run(RunArgs),
    /// Simulate every strategy on every seed and aggregate the results.
    Experiment(ExperimentArgs),
    /// Check a configuration file and print the effective configuration.
    Validate { config: PathBuf },
    /// Write a square grid network file.
    GenNetwork(GenNetworkArgs),
}

#[derive(Args)]
struct SolverArgs {
    /// Wall-clock seconds per solver call.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Branch-and-bound nodes per solver call (0 for unlimited).
    #[arg(long)]
    node_limit: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration (TOML); defaults apply without one.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    strategy: Option<StrategyTag>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long, default_value = "run")]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// Write every solver model in LP format under `<out>/models`.
    #[arg(long)]
    dump_models: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Comma-separated strategies; all four by default.
    #[arg(long, value_delimiter = ',')]
    strategies: Vec<StrategyTag>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    seeds: Vec<u64>,
    #[arg(short, long, default_value = "results")]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// Skip the cumulative-gain chart.
    #[arg(long)]
    no_chart: bool,
    /// Run independent simulations on all cores.
    #[arg(long)]
    parallel: bool,
    #[arg(long)]
    dump_models: bool,
}

#[derive(Args)]
struct GenNetworkArgs {
    /// Nodes per side.
    #[arg(long, default_value_t = 10)]
    size: usize,
    /// Edge length in meters.
    #[arg(long, default_value_t = 100.0)]
    spacing: f64,
    #[arg(long, default_value_t = 0.005)]
    beta_min: f64,
    #[arg(long, default_value_t = 0.02)]
    beta_max: f64,
    /// Seconds without a visit after which an edge's reward saturates.
    #[arg(long, default_value_t = 600.0)]
    saturation_horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{failed} of {total} runs failed")]
    PartialFailure {
        failed: usize,
        total: usize,
        runs: Vec<serde_json::Value>,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(ConfigError::Parse { .. }) => "config_parse",
            CliError::Config(ConfigError::Range { .. }) => "config_range",
            CliError::Config(ConfigError::Io { .. }) | CliError::Io { .. } => "io",
            CliError::Config(ConfigError::Network(_)) | CliError::Network(_) => "network",
            CliError::Sim(_) => "simulation",
            CliError::Experiment(_) => "experiment",
            CliError::PartialFailure { .. } => "partial_failure",
            CliError::Usage(_) => "usage",
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        match self {
            CliError::Config(ConfigError::Parse { path, message }) => {
                v["path"] = json!(path);
                v["message"] = json!(message);
            }
            CliError::Config(ConfigError::Range { path, problems }) => {
                v["path"] = json!(path);
                v["problems"] = json!(problems);
            }
            CliError::PartialFailure { runs, .. } => v["runs"] = json!(runs),
            _ => {}
        }
        v
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads `path` (or the defaults) and checks every value.
fn load_config(path: Option<&Path>) -> Result<SimConfig, CliError> {
    let cfg = match path {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    cfg.validate().map_err(|problems| ConfigError::Range {
        path: path.map_or_else(|| "<defaults>".to_string(), |p| p.display().to_string()),
        problems,
    })?;
    Ok(cfg)
}

fn apply_solver_args(cfg: &mut SimConfig, args: &SolverArgs) -> Result<(), CliError> {
    if let Some(t) = args.time_limit {
        cfg.time_limit = t;
    }
    if let Some(n) = args.node_limit {
        cfg.node_limit = (n > 0).then_some(n);
    }
    cfg.validate().map_err(|problems| CliError::Usage(problems.join("; ")))
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable output"));
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(s) = args.strategy {
        cfg.strategy = s;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    apply_solver_args(&mut cfg, &args.solver)?;
    let network = cfg.build_network()?;
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let cfg_path = args.out.join("config.toml");
    fs::write(&cfg_path, cfg.to_toml()).map_err(io_err(&cfg_path))?;
    let output = run_single(&cfg, &network, &HighsBackend, &args.out, args.dump_models)?;
    print_json(&json!({
        "output_dir": args.out,
        "end_time": output.end_time,
        "metrics": output.metrics,
    }));
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), CliError> {
    let mut base = load_config(args.config.as_deref())?;
    apply_solver_args(&mut base, &args.solver)?;
    if args.seeds.is_empty() {
        return Err(CliError::Usage("at least one seed is required".into()));
    }
    let strategies = if args.strategies.is_empty() {
        StrategyTag::ALL.to_vec()
    } else {
        args.strategies
    };
    let spec = ExperimentSpec {
        base,
        strategies,
        seeds: args.seeds,
        output_dir: args.out.clone(),
        parallel: args.parallel,
        dump_models: args.dump_models,
    };
    let report = run_experiment(&spec, &HighsBackend)?;

    let mut chart_file = None;
    if !args.no_chart {
        let path = args.out.join("gain.svg");
        match chart::cumulative_gain_chart(&report, &path) {
            Ok(()) => chart_file = Some(path),
            Err(e) => log::warn!("chart not written: {e}"),
        }
    }

    let failures: Vec<serde_json::Value> = report
        .failures()
        .map(|r| json!({ "strategy": r.strategy, "seed": r.seed, "error": r.error }))
        .collect();
    if !failures.is_empty() {
        return Err(CliError::PartialFailure {
            failed: failures.len(),
            total: report.runs.len(),
            runs: failures,
        });
    }
    print_json(&json!({
        "output_dir": args.out,
        "runs": report.runs.len(),
        "summary": report.summary,
        "chart": chart_file,
    }));
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<(), CliError> {
    let cfg = load_config(Some(path))?;
    print!("{}", cfg.to_toml());
    Ok(())
}

fn cmd_gen_network(args: GenNetworkArgs) -> Result<(), CliError> {
    if !(args.beta_min <= args.beta_max) {
        return Err(CliError::Usage(format!(
            "beta-min {} exceeds beta-max {}",
            args.beta_min, args.beta_max
        )));
    }
    let network = generate_grid(
        args.size,
        args.spacing,
        BetaPolicy::Uniform {
            min: args.beta_min,
            max: args.beta_max,
        },
        RMaxPolicy::Saturation {
            horizon: args.saturation_horizon,
        },
        args.seed,
    )?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(&args.out, network.to_text()).map_err(io_err(&args.out))?;
    print_json(&json!({
        "output": args.out,
        "nodes": network.node_count(),
        "edges": network.edge_count(),
    }));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code());
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Validate { config } => cmd_validate(&config),
        Command::GenNetwork(args) => cmd_gen_network(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
