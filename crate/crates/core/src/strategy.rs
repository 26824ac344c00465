//! The four planning policies.
//!
//! * `shortest`: every parcel flies its shortest path; the solver is never used.
//! * `distributed`: one single-drone solve on the drone's own belief at pickup.
//! * `decentralized`: as distributed, plus meet-and-merge of beliefs and a
//!   joint solve whenever delivering drones form a communication cluster.
//! * `centralized`: at every pickup all delivering drones are replanned on a
//!   shared, always-synchronized belief, in batches of bounded size.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use crate::belief::{merge, BeliefMatrix, GroundTruthVisits};
use crate::config::{SimConfig, StrategyTag};
use crate::network::{EdgeId, RoadNetwork, TravelTimeTable};
use crate::planner::{
    build_milp, compute_effective_budget, fallback_shortest, solve_cluster, ClusterPlanRequest, DronePlan,
    DroneRequest, MilpBackend, PlanStatus,
};
use crate::sim::log::{EventKind, EventLog, EventRecord};
use crate::sim::metrics::{MetricsLedger, SolverCall, Trigger};
use crate::sim::state::{Drone, DroneMode, Parcel};

/// Read access to the simulation plus the ledgers a strategy writes to.
pub struct PlanningContext<'a> {
    pub now: f64,
    pub network: &'a RoadNetwork,
    pub table: &'a TravelTimeTable,
    pub config: &'a SimConfig,
    pub truth: &'a GroundTruthVisits,
    pub parcels: &'a [Parcel],
    /// Per node, flight time to the nearest charging station.
    pub charger_time: &'a [f64],
    pub backend: &'a dyn MilpBackend,
    pub ledger: &'a mut MetricsLedger,
    pub log: &'a mut EventLog,
    /// Directory receiving an LP file per solver call.
    pub model_dump: Option<&'a Path>,
}

pub trait PlanningStrategy: Send {
    fn tag(&self) -> StrategyTag;

    /// Whether the simulator should report communication clusters.
    fn uses_clusters(&self) -> bool {
        false
    }

    /// Called when `drone` has just picked up its parcel. Returned plans
    /// replace the routes of the drones they name.
    fn on_pickup(&mut self, ctx: &mut PlanningContext<'_>, drones: &mut [Drone], drone: usize) -> Vec<DronePlan>;

    /// Called on every proximity check for each cluster of delivering drones.
    fn on_cluster(
        &mut self,
        _ctx: &mut PlanningContext<'_>,
        _drones: &mut [Drone],
        _cluster: &[usize],
    ) -> Vec<DronePlan> {
        Vec::new()
    }
}

pub fn make_strategy(tag: StrategyTag) -> Box<dyn PlanningStrategy> {
    match tag {
        StrategyTag::Shortest => Box::new(Shortest),
        StrategyTag::Distributed => Box::new(Distributed),
        StrategyTag::Centralized => Box::new(Centralized),
        StrategyTag::Decentralized => Box::new(Decentralized::default()),
    }
}

/// Planning request for a delivering drone, or `None` if it has nothing left
/// to plan (no parcel, or its current leg ends at the drop-off).
pub fn drone_request(ctx: &PlanningContext<'_>, drone: &Drone) -> Option<DroneRequest> {
    let parcel = &ctx.parcels[drone.parcel?];
    let picked_up = parcel.picked_up?;
    let (origin, offset) = drone.planning_origin(ctx.now);
    let destination = parcel.order.destination;
    if origin == destination {
        return None;
    }
    let cfg = ctx.config;
    let at = ctx.now + offset;
    // keep enough charge to reach a charger after the drop-off
    let usable =
        drone.battery_at(at, cfg.consumption_rate) - cfg.consumption_rate * ctx.charger_time[destination.0] / 60.0;
    let budget = compute_effective_budget(
        cfg.alpha,
        parcel.shortest,
        at,
        picked_up,
        usable.max(0.0) / 100.0,
        cfg.consumption_rate,
    );
    Some(DroneRequest {
        drone: drone.id,
        origin,
        destination,
        time_offset: offset,
        budget,
    })
}

fn shortest_plan(ctx: &PlanningContext<'_>, d: &DroneRequest) -> DronePlan {
    let nodes = ctx
        .table
        .path(d.origin, d.destination)
        .expect("drones only carry parcels with reachable drop-offs");
    DronePlan::timed(d.drone, nodes, d.time_offset, ctx.network, ctx.table.speed())
}

/// Jointly plans `members` on `belief`. Drones whose budget no longer covers
/// their shortest trip fly it directly; solver failures fall back to shortest
/// paths for the whole group.
pub fn plan_group(
    ctx: &mut PlanningContext<'_>,
    drones: &[Drone],
    members: &[usize],
    belief: &BeliefMatrix,
    trigger: Trigger,
) -> Vec<DronePlan> {
    let requests: Vec<DroneRequest> = members.iter().filter_map(|&k| drone_request(ctx, &drones[k])).collect();
    if requests.is_empty() {
        return Vec::new();
    }
    let req = ClusterPlanRequest::new(ctx.network, ctx.table, belief, ctx.now, requests);
    let (req, infeasible) = req.split_infeasible();
    let mut plans = Vec::new();
    for d in &infeasible {
        ctx.log.push(
            EventRecord::new(ctx.now, EventKind::Fallback)
                .drone(d.drone)
                .detail(format!("budget {:.3}s below shortest trip", d.budget)),
        );
        plans.push(shortest_plan(ctx, d));
    }
    if req.drones.is_empty() {
        return plans;
    }

    if let Some(dir) = ctx.model_dump {
        let index = ctx.ledger.solver_calls.len();
        match build_milp(&req) {
            Ok(model) => {
                let path = dir.join(format!("model_{index:05}.lp"));
                if let Err(e) = std::fs::write(&path, model.lp.to_lp_format()) {
                    log::warn!("could not write {}: {e}", path.display());
                }
            }
            Err(e) => log::warn!("model {index} not dumped: {e}"),
        }
    }

    let started = Instant::now();
    let outcome = solve_cluster(&req, ctx.backend, &ctx.config.solve_limits());
    let seconds = started.elapsed().as_secs_f64();
    let result = match outcome {
        Ok(r) => r,
        Err(e) => {
            for d in &req.drones {
                ctx.log.push(
                    EventRecord::new(ctx.now, EventKind::Fallback)
                        .drone(d.drone)
                        .detail(e.to_string()),
                );
            }
            fallback_shortest(&req).expect("drones only carry parcels with reachable drop-offs")
        }
    };
    let ids: Vec<usize> = req.drones.iter().map(|d| d.drone).collect();
    let status = match result.status {
        PlanStatus::Optimal => "optimal",
        PlanStatus::TimeLimited => "time_limited",
        PlanStatus::Fallback => "fallback",
        PlanStatus::Exhaustive => "exhaustive",
    };
    ctx.log.push(
        EventRecord::new(ctx.now, EventKind::Replan)
            .reward(result.objective)
            .detail(format!(
                "{} drones={:?} status={status}",
                match trigger {
                    Trigger::Pickup => "pickup",
                    Trigger::Cluster => "cluster",
                },
                ids
            )),
    );
    ctx.ledger.solver_calls.push(SolverCall {
        time: ctx.now,
        trigger,
        drones: ids,
        seconds,
        status: result.status,
        objective: result.objective,
    });
    plans.extend(result.plans);
    plans
}

pub struct Shortest;

impl PlanningStrategy for Shortest {
    fn tag(&self) -> StrategyTag {
        StrategyTag::Shortest
    }

    fn on_pickup(&mut self, ctx: &mut PlanningContext<'_>, drones: &mut [Drone], drone: usize) -> Vec<DronePlan> {
        drone_request(ctx, &drones[drone])
            .map(|d| vec![shortest_plan(ctx, &d)])
            .unwrap_or_default()
    }
}

pub struct Distributed;

impl PlanningStrategy for Distributed {
    fn tag(&self) -> StrategyTag {
        StrategyTag::Distributed
    }

    fn on_pickup(&mut self, ctx: &mut PlanningContext<'_>, drones: &mut [Drone], drone: usize) -> Vec<DronePlan> {
        let belief = drones[drone].belief.clone();
        plan_group(ctx, drones, &[drone], &belief, Trigger::Pickup)
    }
}

pub struct Centralized;

impl PlanningStrategy for Centralized {
    fn tag(&self) -> StrategyTag {
        StrategyTag::Centralized
    }

    fn on_pickup(&mut self, ctx: &mut PlanningContext<'_>, drones: &mut [Drone], _drone: usize) -> Vec<DronePlan> {
        // most recent pickups are planned first
        let mut members: Vec<usize> = drones
            .iter()
            .filter(|d| d.mode == DroneMode::Delivering)
            .map(|d| d.id)
            .collect();
        let picked = |k: usize| drones[k].parcel.and_then(|p| ctx.parcels[p].picked_up).unwrap_or(0.0);
        members.sort_by(|&a, &b| picked(b).total_cmp(&picked(a)).then(a.cmp(&b)));

        let mut plans: Vec<DronePlan> = Vec::new();
        for batch in members.chunks(ctx.config.centralized_batch) {
            // every drone reports every scan to the server at once, so the
            // shared belief is the merge of all drone beliefs
            let mut shared = merge(drones.iter().map(|d| &d.belief)).expect("drone beliefs share one network");
            ctx.ledger.belief_checks += 1;
            if &shared != ctx.truth.as_belief() {
                ctx.ledger.belief_mismatches += 1;
            }
            // edges claimed by earlier batches carry no reward for later ones
            for plan in &plans {
                for (e, _) in plan.edges(ctx.network) {
                    shared.observe(e, ctx.now).expect("edge ids come from the network");
                }
            }
            let batch_plans = plan_group(ctx, drones, batch, &shared, Trigger::Pickup);
            plans.extend(batch_plans);
        }
        plans
    }
}

/// Drone and parcel pairs that took part in a joint solve.
type ClusterKey = BTreeSet<(usize, usize)>;

#[derive(Default)]
pub struct Decentralized {
    last_solved: Vec<Option<ClusterKey>>,
}

impl PlanningStrategy for Decentralized {
    fn tag(&self) -> StrategyTag {
        StrategyTag::Decentralized
    }

    fn uses_clusters(&self) -> bool {
        true
    }

    fn on_pickup(&mut self, ctx: &mut PlanningContext<'_>, drones: &mut [Drone], drone: usize) -> Vec<DronePlan> {
        let belief = drones[drone].belief.clone();
        plan_group(ctx, drones, &[drone], &belief, Trigger::Pickup)
    }

    fn on_cluster(&mut self, ctx: &mut PlanningContext<'_>, drones: &mut [Drone], cluster: &[usize]) -> Vec<DronePlan> {
        let merged = merge(cluster.iter().map(|&k| &drones[k].belief)).expect("drone beliefs share one network");
        let routes: Vec<Vec<EdgeId>> = cluster
            .iter()
            .map(|&k| remaining_edges(ctx.network, &drones[k]))
            .collect();
        // a joint solve can only help if the meeting reveals that a planned
        // edge was scanned by someone else, or if two plans share an edge
        let stale = cluster
            .iter()
            .zip(&routes)
            .any(|(&k, route)| route.iter().any(|&e| merged.get(e) > drones[k].belief.get(e)));
        let mut seen = BTreeSet::new();
        let overlap = routes.iter().any(|route| {
            let own: BTreeSet<EdgeId> = route.iter().copied().collect();
            own.into_iter().any(|e| !seen.insert(e))
        });
        for &k in cluster {
            drones[k].belief.clone_from(&merged);
        }
        if !stale && !overlap {
            return Vec::new();
        }

        let key: ClusterKey = cluster
            .iter()
            .filter_map(|&k| drones[k].parcel.map(|p| (k, p)))
            .collect();
        if self.last_solved.len() < drones.len() {
            self.last_solved.resize(drones.len(), None);
        }
        // solve again only when some member has not yet planned jointly with
        // all of the others on its current parcel
        let fresh = cluster
            .iter()
            .any(|&k| !self.last_solved[k].as_ref().is_some_and(|prev| prev.is_superset(&key)));
        if !fresh {
            return Vec::new();
        }
        for &k in cluster {
            self.last_solved[k] = Some(key.clone());
        }
        ctx.log
            .push(EventRecord::new(ctx.now, EventKind::Cluster).detail(format!("drones={cluster:?}")));
        plan_group(ctx, drones, cluster, &merged, Trigger::Cluster)
    }
}

/// Edges a drone has yet to start, from the head of its current leg on.
fn remaining_edges(network: &RoadNetwork, drone: &Drone) -> Vec<EdgeId> {
    let mut at = drone.leg.map_or(drone.node, |l| l.to);
    let mut edges = Vec::with_capacity(drone.route.len());
    for &next in &drone.route {
        if let Some(e) = network.find_edge(at, next) {
            edges.push(e);
        }
        at = next;
    }
    edges
}
