//! Run ledger and the per-run summary metrics derived from it.

use std::fmt::Write as _;

use serde::Serialize;

use crate::belief::{average_aoi, GroundTruthVisits};
use crate::config::StrategyTag;
use crate::network::EdgeId;
use crate::planner::PlanStatus;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRecord {
    pub time: f64,
    pub drone: usize,
    pub edge: EdgeId,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeliveryRecord {
    pub parcel: usize,
    pub drone: usize,
    pub picked_up: f64,
    pub delivered: f64,
    /// Shortest pickup-to-drop-off flight time.
    pub shortest: f64,
}

impl DeliveryRecord {
    pub fn in_flight(&self) -> f64 {
        self.delivered - self.picked_up
    }

    pub fn delay_pct(&self) -> f64 {
        (self.in_flight() - self.shortest) / self.shortest * 100.0
    }
}

/// What prompted a planning call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Pickup,
    Cluster,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverCall {
    pub time: f64,
    pub trigger: Trigger,
    pub drones: Vec<usize>,
    pub seconds: f64,
    pub status: PlanStatus,
    pub objective: f64,
}

/// Everything the simulator records for metrics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLedger {
    pub scans: Vec<ScanRecord>,
    pub deliveries: Vec<DeliveryRecord>,
    pub solver_calls: Vec<SolverCall>,
    /// Centralized solves where the shared belief was compared to the truth.
    pub belief_checks: usize,
    pub belief_mismatches: usize,
    pub failed_parcels: Vec<usize>,
}

impl MetricsLedger {
    pub fn total_gain(&self) -> f64 {
        self.scans.iter().fold(0.0, |acc, s| acc + s.reward)
    }

    /// Cumulative realized reward sampled at `0, interval, 2·interval, …`
    /// up to and including `horizon` when it falls on the grid.
    pub fn time_series(&self, interval: f64, horizon: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut acc = 0.0;
        let mut next = 0;
        let mut k = 0usize;
        loop {
            let t = k as f64 * interval;
            if t > horizon + 1e-9 {
                return out;
            }
            while next < self.scans.len() && self.scans[next].time <= t {
                acc += self.scans[next].reward;
                next += 1;
            }
            out.push((t, acc));
            k += 1;
        }
    }

    pub fn milp_calls(&self) -> usize {
        self.solver_calls.len()
    }

    pub fn mean_solve_seconds(&self) -> f64 {
        if self.solver_calls.is_empty() {
            0.0
        } else {
            self.solver_calls.iter().map(|c| c.seconds).sum::<f64>() / self.solver_calls.len() as f64
        }
    }
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub strategy: StrategyTag,
    pub seed: u64,
    pub total_info_gain: f64,
    pub spatial_coverage_pct: f64,
    pub avg_aoi_pct: f64,
    pub avg_delivery_delay_pct: f64,
    pub milp_calls: usize,
    pub avg_cpu_time_s: f64,
    pub orders: usize,
    pub delivered: usize,
    pub failed: usize,
}

impl RunMetrics {
    /// Columns of `metrics.csv`. Solver wall-clock time, the only
    /// nondeterministic quantity of a run, is kept out of it.
    pub const CSV_HEADER: &'static str = "strategy,seed,total_info_gain,spatial_coverage_pct,avg_aoi_pct,avg_delivery_delay_pct,milp_calls,orders,delivered,failed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.strategy,
            self.seed,
            self.total_info_gain,
            self.spatial_coverage_pct,
            self.avg_aoi_pct,
            self.avg_delivery_delay_pct,
            self.milp_calls,
            self.orders,
            self.delivered,
            self.failed
        )
    }
}

pub fn compute_metrics(
    ledger: &MetricsLedger,
    truth: &GroundTruthVisits,
    horizon: f64,
    strategy: StrategyTag,
    seed: u64,
    orders: usize,
) -> RunMetrics {
    let edges = truth.len().max(1) as f64;
    let delay = if ledger.deliveries.is_empty() {
        0.0
    } else {
        ledger.deliveries.iter().map(DeliveryRecord::delay_pct).sum::<f64>() / ledger.deliveries.len() as f64
    };
    RunMetrics {
        strategy,
        seed,
        total_info_gain: ledger.total_gain(),
        spatial_coverage_pct: truth.visited_count() as f64 / edges * 100.0,
        avg_aoi_pct: average_aoi(truth, horizon, horizon).unwrap_or(1.0) * 100.0,
        avg_delivery_delay_pct: delay,
        milp_calls: ledger.milp_calls(),
        avg_cpu_time_s: ledger.mean_solve_seconds(),
        orders,
        delivered: ledger.deliveries.len(),
        failed: ledger.failed_parcels.len(),
    }
}

pub fn time_series_csv(series: &[(f64, f64)]) -> String {
    let mut s = String::from("time,cumulative_gain\n");
    for (t, g) in series {
        let _ = writeln!(s, "{t},{g}");
    }
    s
}
