//! Scenario configuration.
//!
//! Scenario files are TOML with one table per concern. Every key is optional;
//! missing keys take the defaults listed on [`SimConfig::default`]. Unknown
//! keys are rejected so that typos cannot silently fall back to defaults.
//!
//! ```toml
//! [network]          # either `file` or the grid keys
//! grid_size = 10
//! grid_spacing = 100.0
//! beta_min = 0.005
//! beta_max = 0.02
//! saturation_horizon = 600.0
//!
//! [fleet]
//! drones = 6
//! speed = 8.0
//!
//! [planner]
//! alpha = 0.3
//! comm_radius = 300.0
//!
//! [sim]
//! strategy = "decentralized"
//! horizon = 1800.0
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{generate_grid, BetaPolicy, NetworkError, RMaxPolicy, RoadNetwork};
use crate::planner::SolveLimits;

/// The four planning policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyTag {
    Shortest,
    Distributed,
    Centralized,
    Decentralized,
}

impl StrategyTag {
    pub const ALL: [StrategyTag; 4] = [
        StrategyTag::Shortest,
        StrategyTag::Distributed,
        StrategyTag::Centralized,
        StrategyTag::Decentralized,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyTag::Shortest => "shortest",
            StrategyTag::Distributed => "distributed",
            StrategyTag::Centralized => "centralized",
            StrategyTag::Decentralized => "decentralized",
        }
    }
}

impl fmt::Display for StrategyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown strategy `{s}` (expected shortest|distributed|centralized|decentralized)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NetworkSource {
    File(PathBuf),
    Grid {
        size: usize,
        spacing: f64,
        beta_min: f64,
        beta_max: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StationPlacement {
    /// Nodes closest to evenly spaced points on the network's bounding-box diagonal.
    Auto(usize),
    Nodes(Vec<String>),
}

/// Fully resolved simulation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub network: NetworkSource,
    /// Seconds of neglect after which a generated edge saturates.
    pub saturation_horizon: f64,
    pub drones: usize,
    /// m/s
    pub speed: f64,
    /// Initial charge range, percent.
    pub battery_min: f64,
    pub battery_max: f64,
    /// Percent per minute of flight.
    pub consumption_rate: f64,
    /// Fraction of flight time an assignment may use.
    pub battery_reserve: f64,
    /// Percent per minute.
    pub charging_rate: f64,
    pub stations: StationPlacement,
    /// Orders per second.
    pub order_rate: f64,
    pub max_parcels: Option<usize>,
    /// Minimum shortest-path length of a generated order, meters.
    pub min_trip_length: f64,
    pub alpha: f64,
    /// Communication radius, meters.
    pub comm_radius: f64,
    /// Seconds per solver call.
    pub time_limit: f64,
    /// Branch-and-bound nodes per solver call; `None` for unlimited.
    pub node_limit: Option<u64>,
    pub centralized_batch: usize,
    pub horizon: f64,
    pub strategy: StrategyTag,
    pub seed: u64,
    pub proximity_interval: f64,
    pub sample_interval: f64,
    pub scan_when_empty: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            network: NetworkSource::Grid {
                size: 10,
                spacing: 100.0,
                beta_min: 0.005,
                beta_max: 0.02,
                seed: 0,
            },
            saturation_horizon: 600.0,
            drones: 6,
            speed: 8.0,
            battery_min: 30.0,
            battery_max: 90.0,
            consumption_rate: 1.68,
            battery_reserve: 0.95,
            charging_rate: 4.8,
            stations: StationPlacement::Auto(2),
            order_rate: 0.8,
            max_parcels: Some(40),
            min_trip_length: 200.0,
            alpha: 0.3,
            comm_radius: 300.0,
            time_limit: 10.0,
            node_limit: Some(50),
            centralized_batch: 3,
            horizon: 1800.0,
            strategy: StrategyTag::Decentralized,
            seed: 1,
            proximity_interval: 1.0,
            sample_interval: 10.0,
            scan_when_empty: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: invalid values:\n  {}", .problems.join("\n  "))]
    Range { path: String, problems: Vec<String> },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkSection {
    file: Option<PathBuf>,
    grid_size: Option<usize>,
    grid_spacing: Option<f64>,
    beta_min: Option<f64>,
    beta_max: Option<f64>,
    network_seed: Option<u64>,
    saturation_horizon: Option<f64>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FleetSection {
    drones: Option<usize>,
    speed: Option<f64>,
    battery_min: Option<f64>,
    battery_max: Option<f64>,
    consumption_rate: Option<f64>,
    battery_reserve: Option<f64>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChargingSection {
    stations: Option<Vec<String>>,
    station_count: Option<usize>,
    rate: Option<f64>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OrdersSection {
    rate: Option<f64>,
    /// 0 disables the cap.
    max_parcels: Option<usize>,
    min_trip_length: Option<f64>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlannerSection {
    alpha: Option<f64>,
    comm_radius: Option<f64>,
    time_limit: Option<f64>,
    /// 0 disables the limit.
    node_limit: Option<u64>,
    centralized_batch: Option<usize>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    horizon: Option<f64>,
    strategy: Option<StrategyTag>,
    seed: Option<u64>,
    proximity_interval: Option<f64>,
    sample_interval: Option<f64>,
    scan_when_empty: Option<bool>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    network: NetworkSection,
    #[serde(default)]
    fleet: FleetSection,
    #[serde(default)]
    charging: ChargingSection,
    #[serde(default)]
    orders: OrdersSection,
    #[serde(default)]
    planner: PlannerSection,
    #[serde(default)]
    sim: SimSection,
}

impl SimConfig {
    /// Reads, defaults and range-checks a scenario file. Relative network
    /// paths are resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::parse_named(&text, &path.display().to_string())?;
        if let NetworkSource::File(p) = &mut cfg.network {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_named(text, "<config>")
    }

    fn parse_named(text: &str, name: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: name.to_string(),
            message: describe_toml_error(text, &e),
        })?;
        let d = SimConfig::default();
        let grid_default = match &d.network {
            NetworkSource::Grid {
                size,
                spacing,
                beta_min,
                beta_max,
                seed,
            } => (*size, *spacing, *beta_min, *beta_max, *seed),
            NetworkSource::File(_) => unreachable!(),
        };
        let n = &file.network;
        let network = match &n.file {
            Some(p) => NetworkSource::File(p.clone()),
            None => NetworkSource::Grid {
                size: n.grid_size.unwrap_or(grid_default.0),
                spacing: n.grid_spacing.unwrap_or(grid_default.1),
                beta_min: n.beta_min.unwrap_or(grid_default.2),
                beta_max: n.beta_max.unwrap_or(grid_default.3),
                seed: n.network_seed.unwrap_or(grid_default.4),
            },
        };
        let stations = match (&file.charging.stations, file.charging.station_count) {
            (Some(names), _) => StationPlacement::Nodes(names.clone()),
            (None, Some(k)) => StationPlacement::Auto(k),
            (None, None) => d.stations.clone(),
        };
        let cfg = SimConfig {
            network,
            saturation_horizon: n.saturation_horizon.unwrap_or(d.saturation_horizon),
            drones: file.fleet.drones.unwrap_or(d.drones),
            speed: file.fleet.speed.unwrap_or(d.speed),
            battery_min: file.fleet.battery_min.unwrap_or(d.battery_min),
            battery_max: file.fleet.battery_max.unwrap_or(d.battery_max),
            consumption_rate: file.fleet.consumption_rate.unwrap_or(d.consumption_rate),
            battery_reserve: file.fleet.battery_reserve.unwrap_or(d.battery_reserve),
            charging_rate: file.charging.rate.unwrap_or(d.charging_rate),
            stations,
            order_rate: file.orders.rate.unwrap_or(d.order_rate),
            max_parcels: match file.orders.max_parcels {
                Some(0) => None,
                Some(k) => Some(k),
                None => d.max_parcels,
            },
            min_trip_length: file.orders.min_trip_length.unwrap_or(d.min_trip_length),
            alpha: file.planner.alpha.unwrap_or(d.alpha),
            comm_radius: file.planner.comm_radius.unwrap_or(d.comm_radius),
            time_limit: file.planner.time_limit.unwrap_or(d.time_limit),
            node_limit: match file.planner.node_limit {
                Some(0) => None,
                Some(k) => Some(k),
                None => d.node_limit,
            },
            centralized_batch: file.planner.centralized_batch.unwrap_or(d.centralized_batch),
            horizon: file.sim.horizon.unwrap_or(d.horizon),
            strategy: file.sim.strategy.unwrap_or(d.strategy),
            seed: file.sim.seed.unwrap_or(d.seed),
            proximity_interval: file.sim.proximity_interval.unwrap_or(d.proximity_interval),
            sample_interval: file.sim.sample_interval.unwrap_or(d.sample_interval),
            scan_when_empty: file.sim.scan_when_empty.unwrap_or(d.scan_when_empty),
        };
        cfg.validate().map_err(|problems| ConfigError::Range {
            path: name.to_string(),
            problems,
        })?;
        Ok(cfg)
    }

    /// Lists every out-of-range value.
    pub fn solve_limits(&self) -> SolveLimits {
        SolveLimits {
            time: self.time_limit,
            nodes: self.node_limit,
        }
    }

    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut bad = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                bad.push(format!("{name} must be positive and finite, got {v}"));
            }
        };
        positive("fleet.speed", self.speed);
        positive("fleet.consumption_rate", self.consumption_rate);
        positive("charging.rate", self.charging_rate);
        positive("orders.rate", self.order_rate);
        positive("planner.comm_radius", self.comm_radius);
        positive("planner.time_limit", self.time_limit);
        positive("sim.horizon", self.horizon);
        positive("sim.proximity_interval", self.proximity_interval);
        positive("sim.sample_interval", self.sample_interval);
        positive("network.saturation_horizon", self.saturation_horizon);
        if let NetworkSource::Grid {
            size,
            spacing,
            beta_min,
            beta_max,
            ..
        } = &self.network
        {
            if *size < 2 {
                bad.push(format!("network.grid_size must be >= 2, got {size}"));
            }
            if !(*spacing > 0.0) {
                bad.push(format!("network.grid_spacing must be positive, got {spacing}"));
            }
            if !(*beta_min >= 0.0 && beta_max >= beta_min) {
                bad.push(format!(
                    "network.beta_min/beta_max must satisfy 0 <= min <= max, got [{beta_min}, {beta_max}]"
                ));
            }
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            bad.push(format!("planner.alpha must be >= 0, got {}", self.alpha));
        }
        if !(0.0..=100.0).contains(&self.battery_min)
            || !(0.0..=100.0).contains(&self.battery_max)
            || self.battery_min > self.battery_max
        {
            bad.push(format!(
                "fleet.battery_min/battery_max must satisfy 0 <= min <= max <= 100, got [{}, {}]",
                self.battery_min, self.battery_max
            ));
        }
        if !(self.battery_reserve > 0.0 && self.battery_reserve <= 1.0) {
            bad.push(format!(
                "fleet.battery_reserve must be in (0, 1], got {}",
                self.battery_reserve
            ));
        }
        if self.centralized_batch == 0 {
            bad.push("planner.centralized_batch must be >= 1".into());
        }
        if !(self.min_trip_length >= 0.0) {
            bad.push(format!(
                "orders.min_trip_length must be >= 0, got {}",
                self.min_trip_length
            ));
        }
        match &self.stations {
            StationPlacement::Auto(0) => bad.push("charging.station_count must be >= 1".into()),
            StationPlacement::Nodes(v) if v.is_empty() => bad.push("charging.stations must not be empty".into()),
            _ => {}
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(bad)
        }
    }

    /// Loads or generates the configured road network.
    pub fn build_network(&self) -> Result<RoadNetwork, NetworkError> {
        match &self.network {
            NetworkSource::File(p) => RoadNetwork::load(p),
            NetworkSource::Grid {
                size,
                spacing,
                beta_min,
                beta_max,
                seed,
            } => generate_grid(
                *size,
                *spacing,
                BetaPolicy::Uniform {
                    min: *beta_min,
                    max: *beta_max,
                },
                RMaxPolicy::Saturation {
                    horizon: self.saturation_horizon,
                },
                *seed,
            ),
        }
    }

    /// The effective configuration as a complete TOML document.
    pub fn to_toml(&self) -> String {
        let network = match &self.network {
            NetworkSource::File(p) => NetworkSection {
                file: Some(p.clone()),
                saturation_horizon: Some(self.saturation_horizon),
                ..Default::default()
            },
            NetworkSource::Grid {
                size,
                spacing,
                beta_min,
                beta_max,
                seed,
            } => NetworkSection {
                file: None,
                grid_size: Some(*size),
                grid_spacing: Some(*spacing),
                beta_min: Some(*beta_min),
                beta_max: Some(*beta_max),
                network_seed: Some(*seed),
                saturation_horizon: Some(self.saturation_horizon),
            },
        };
        let (stations, station_count) = match &self.stations {
            StationPlacement::Auto(k) => (None, Some(*k)),
            StationPlacement::Nodes(v) => (Some(v.clone()), None),
        };
        let file = ConfigFile {
            network,
            fleet: FleetSection {
                drones: Some(self.drones),
                speed: Some(self.speed),
                battery_min: Some(self.battery_min),
                battery_max: Some(self.battery_max),
                consumption_rate: Some(self.consumption_rate),
                battery_reserve: Some(self.battery_reserve),
            },
            charging: ChargingSection {
                stations,
                station_count,
                rate: Some(self.charging_rate),
            },
            orders: OrdersSection {
                rate: Some(self.order_rate),
                max_parcels: Some(self.max_parcels.unwrap_or(0)),
                min_trip_length: Some(self.min_trip_length),
            },
            planner: PlannerSection {
                alpha: Some(self.alpha),
                comm_radius: Some(self.comm_radius),
                time_limit: Some(self.time_limit),
                node_limit: Some(self.node_limit.unwrap_or(0)),
                centralized_batch: Some(self.centralized_batch),
            },
            sim: SimSection {
                horizon: Some(self.horizon),
                strategy: Some(self.strategy),
                seed: Some(self.seed),
                proximity_interval: Some(self.proximity_interval),
                sample_interval: Some(self.sample_interval),
                scan_when_empty: Some(self.scan_when_empty),
            },
        };
        toml::to_string(&file).expect("config tables always serialize")
    }
}

/// Renders a TOML error with its 1-based line number.
fn describe_toml_error(text: &str, e: &toml::de::Error) -> String {
    let message = e.message().trim().to_string();
    match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}: {message}")
        }
        None => message,
    }
}
