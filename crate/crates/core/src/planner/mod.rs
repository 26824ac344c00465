//! Cooperative detour planning for a cluster of delivering drones.
//!
//! A [`ClusterPlanRequest`] describes each drone's planning origin (the head of
//! the edge it is currently flying), destination, time offset until it reaches
//! that origin and effective time budget. [`solve_cluster`] turns it into a
//! joint MILP, solves it through a [`MilpBackend`] and extracts one timed path
//! per drone. [`brute_force_plan`] enumerates the same problem exhaustively on
//! small instances and [`fallback_shortest`] is the always-available answer.

pub mod backend;
mod milp;
mod oracle;

use std::collections::HashMap;
use std::time::Instant;

use thiserror::Error;

use crate::belief::BeliefMatrix;
use crate::network::{ellipsoid_prune, EdgeId, NodeId, PruneTarget, RoadNetwork, Subnetwork, TravelTimeTable};
use crate::reward::{expected_reward, RewardParams};

pub use backend::{HighsBackend, LinearModel, MilpBackend, RawSolution, SolveError, SolveLimits, SolveStatus};
pub use milp::{build_milp, extract_paths, MilpModel};
pub use oracle::brute_force_plan;

/// Arrival-time tolerance used by plan invariants.
pub const TIME_EPS: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum PlannerError {
    #[error("cluster has no drones")]
    EmptyCluster,
    #[error("drone {drone}: destination unreachable from planning origin")]
    Unreachable { drone: usize },
    #[error("drone {drone}: budget {budget:.3}s is below the shortest trip {shortest:.3}s")]
    BudgetInfeasible { drone: usize, budget: f64, shortest: f64 },
    #[error("belief timestamp {stamp} on edge {edge} is ahead of planning time {t_curr}")]
    BeliefAhead { edge: usize, stamp: f64, t_curr: f64 },
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Solver(#[from] SolveError),
}

/// Per-drone part of a joint planning request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroneRequest {
    /// Caller-side drone identifier, echoed back in the plan.
    pub drone: usize,
    pub origin: NodeId,
    pub destination: NodeId,
    /// Seconds from `t_curr` until the drone reaches `origin`.
    pub time_offset: f64,
    /// Seconds available from reaching `origin` until arrival at `destination`.
    pub budget: f64,
}

/// Everything one joint solve needs, as value snapshots of simulator state.
#[derive(Debug, Clone)]
pub struct ClusterPlanRequest<'a> {
    pub network: &'a RoadNetwork,
    pub table: &'a TravelTimeTable,
    pub belief: &'a BeliefMatrix,
    pub t_curr: f64,
    pub drones: Vec<DroneRequest>,
    pub subnetwork: Subnetwork,
}

impl<'a> ClusterPlanRequest<'a> {
    /// Builds a request whose subnetwork is the ellipsoid-pruned graph of
    /// `drones`.
    pub fn new(
        network: &'a RoadNetwork,
        table: &'a TravelTimeTable,
        belief: &'a BeliefMatrix,
        t_curr: f64,
        drones: Vec<DroneRequest>,
    ) -> Self {
        let targets: Vec<PruneTarget> = drones
            .iter()
            .map(|d| PruneTarget {
                origin: d.origin,
                destination: d.destination,
                budget: d.budget,
            })
            .collect();
        let subnetwork = ellipsoid_prune(network, table, &targets);
        Self {
            network,
            table,
            belief,
            t_curr,
            drones,
            subnetwork,
        }
    }

    /// Splits off drones whose shortest trip already exceeds their budget; the
    /// remaining request is re-pruned on the feasible drones only.
    pub fn split_infeasible(self) -> (Self, Vec<DroneRequest>) {
        let (ok, bad): (Vec<_>, Vec<_>) = self.drones.iter().partition(|d| {
            self.table.time(d.origin, d.destination) <= d.budget + crate::network::budget_slack(d.budget)
        });
        if bad.is_empty() {
            return (self, bad);
        }
        let req = Self::new(self.network, self.table, self.belief, self.t_curr, ok);
        (req, bad)
    }

    fn validate(&self) -> Result<(), PlannerError> {
        if self.drones.is_empty() {
            return Err(PlannerError::EmptyCluster);
        }
        for d in &self.drones {
            let shortest = self.table.time(d.origin, d.destination);
            if !shortest.is_finite() {
                return Err(PlannerError::Unreachable { drone: d.drone });
            }
            if shortest > d.budget + crate::network::budget_slack(d.budget) {
                return Err(PlannerError::BudgetInfeasible {
                    drone: d.drone,
                    budget: d.budget,
                    shortest,
                });
            }
        }
        for e in &self.subnetwork.edges {
            let stamp = self.belief.get(*e);
            if stamp > self.t_curr + TIME_EPS {
                return Err(PlannerError::BeliefAhead {
                    edge: e.0,
                    stamp,
                    t_curr: self.t_curr,
                });
            }
        }
        Ok(())
    }
}

/// Timed node path for one drone. `arrivals[i]` is seconds after `t_curr`.
#[derive(Debug, Clone, PartialEq)]
pub struct DronePlan {
    pub drone: usize,
    pub nodes: Vec<NodeId>,
    pub arrivals: Vec<f64>,
}

impl DronePlan {
    /// Path with arrival times accumulated from `offset` at the first node.
    pub fn timed(drone: usize, nodes: Vec<NodeId>, offset: f64, network: &RoadNetwork, speed: f64) -> Self {
        let mut arrivals = Vec::with_capacity(nodes.len());
        let mut t = offset;
        arrivals.push(t);
        for w in nodes.windows(2) {
            let e = network
                .find_edge(w[0], w[1])
                .expect("consecutive plan nodes must be joined by an edge");
            t += network.edge(e).length / speed;
            arrivals.push(t);
        }
        Self { drone, nodes, arrivals }
    }

    pub fn final_arrival(&self) -> f64 {
        *self.arrivals.last().expect("plans are never empty")
    }

    /// Directed edges in traversal order together with head arrival times.
    pub fn edges<'n>(&'n self, network: &'n RoadNetwork) -> impl Iterator<Item = (EdgeId, f64)> + 'n {
        self.nodes.windows(2).zip(&self.arrivals[1..]).map(move |(w, t)| {
            (
                network
                    .find_edge(w[0], w[1])
                    .expect("consecutive plan nodes must be joined by an edge"),
                *t,
            )
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanStatus {
    Optimal,
    TimeLimited,
    Fallback,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub plans: Vec<DronePlan>,
    /// Expected reward of the joint plan, as reported by the producing method.
    pub objective: f64,
    pub status: PlanStatus,
    /// Wall-clock seconds spent in the solver.
    pub solve_seconds: f64,
}

/// Detour slack or battery flight time, whichever is smaller, in seconds.
///
/// `battery` is a fraction in `[0, 1]` and `consumption` is in percent per
/// minute. The result may be negative once the detour slack is spent.
pub fn compute_effective_budget(
    alpha: f64,
    tau_od: f64,
    t_curr: f64,
    t_pickup: f64,
    battery: f64,
    consumption: f64,
) -> f64 {
    let detour = (1.0 + alpha) * tau_od - (t_curr - t_pickup);
    let flight = battery * 100.0 / consumption * 60.0;
    detour.min(flight)
}

/// Cooperative expected reward of a set of plans: each edge counts once, at the
/// earliest head arrival among the drones that traverse it.
pub fn plan_objective(network: &RoadNetwork, belief: &BeliefMatrix, t_curr: f64, plans: &[DronePlan]) -> f64 {
    let mut first_scan: HashMap<EdgeId, f64> = HashMap::new();
    for plan in plans {
        for (e, t) in plan.edges(network) {
            first_scan.entry(e).and_modify(|s| *s = s.min(t)).or_insert(t);
        }
    }
    let mut edges: Vec<_> = first_scan.into_iter().collect();
    edges.sort_by_key(|(e, _)| *e);
    edges
        .into_iter()
        .map(|(e, t)| expected_reward(&RewardParams::of(network.edge(e)), t_curr, t, belief.get(e)))
        .sum()
}

/// Every drone flies its shortest path; the objective is evaluated afterwards.
pub fn fallback_shortest(req: &ClusterPlanRequest<'_>) -> Result<PlanResult, PlannerError> {
    let speed = req.table.speed();
    let plans = req
        .drones
        .iter()
        .map(|d| {
            req.table
                .path(d.origin, d.destination)
                .map(|nodes| DronePlan::timed(d.drone, nodes, d.time_offset, req.network, speed))
                .ok_or(PlannerError::Unreachable { drone: d.drone })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let objective = plan_objective(req.network, req.belief, req.t_curr, &plans);
    Ok(PlanResult {
        plans,
        objective,
        status: PlanStatus::Fallback,
        solve_seconds: 0.0,
    })
}

/// Builds, solves and extracts the joint plan for a feasible cluster.
pub fn solve_cluster(
    req: &ClusterPlanRequest<'_>,
    backend: &dyn MilpBackend,
    limits: &SolveLimits,
) -> Result<PlanResult, PlannerError> {
    req.validate()?;
    let model = build_milp(req)?;
    let started = Instant::now();
    let raw = backend.solve(&model.lp, limits);
    let elapsed = started.elapsed().as_secs_f64();
    let raw = raw?;
    let mut result = extract_paths(&model, &raw, req);
    result.solve_seconds = elapsed;
    Ok(result)
}
