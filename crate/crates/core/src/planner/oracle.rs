//! Exhaustive reference planner for small clusters.
//!
//! Enumerates every budget-feasible simple path of every drone inside the
//! request's subnetwork and scores every combination with the cooperative
//! objective. Arrival times are strictly increasing along a flown path, so a
//! joint MILP solution can never revisit a node; simple paths are therefore
//! exactly the MILP's feasible routes.

use std::collections::HashMap;

use crate::network::{budget_slack, EdgeId, NodeId};

use super::{ClusterPlanRequest, DronePlan, PlanResult, PlanStatus, PlannerError};

const MAX_NODES: usize = 16;
const MAX_DRONES: usize = 3;
const MAX_PATHS_PER_DRONE: usize = 200_000;
const MAX_COMBINATIONS: u128 = 20_000_000;

struct Candidate {
    nodes: Vec<NodeId>,
    /// (edge, head arrival relative to t_curr)
    scans: Vec<(EdgeId, f64)>,
}

pub fn brute_force_plan(req: &ClusterPlanRequest<'_>, max_edges_per_path: usize) -> Result<PlanResult, PlannerError> {
    req.validate()?;
    if req.subnetwork.nodes.len() > MAX_NODES {
        return Err(PlannerError::TooLarge(format!(
            "{} nodes (limit {MAX_NODES})",
            req.subnetwork.nodes.len()
        )));
    }
    if req.drones.len() > MAX_DRONES {
        return Err(PlannerError::TooLarge(format!(
            "{} drones (limit {MAX_DRONES})",
            req.drones.len()
        )));
    }

    let net = req.network;
    let speed = req.table.speed();
    let mut in_sub: HashMap<NodeId, Vec<(EdgeId, NodeId, f64)>> = HashMap::new();
    for &e in &req.subnetwork.edges {
        let edge = net.edge(e);
        in_sub
            .entry(edge.from)
            .or_default()
            .push((e, edge.to, edge.length / speed));
    }

    let mut per_drone: Vec<Vec<Candidate>> = Vec::with_capacity(req.drones.len());
    for d in &req.drones {
        let mut found = Vec::new();
        if d.origin == d.destination {
            found.push(Candidate {
                nodes: vec![d.origin],
                scans: Vec::new(),
            });
        } else {
            let limit = d.budget + budget_slack(d.budget);
            let mut stack_nodes = vec![d.origin];
            let mut stack_scans = Vec::new();
            let mut on_path = vec![false; net.node_count()];
            on_path[d.origin.0] = true;
            let mut overflow = false;
            dfs(
                d.origin,
                0.0,
                d.time_offset,
                limit,
                d.destination,
                max_edges_per_path,
                &in_sub,
                req,
                &mut on_path,
                &mut stack_nodes,
                &mut stack_scans,
                &mut found,
                &mut overflow,
            );
            if overflow {
                return Err(PlannerError::TooLarge(format!(
                    "drone {} has more than {MAX_PATHS_PER_DRONE} candidate paths",
                    d.drone
                )));
            }
        }
        if found.is_empty() {
            return Err(PlannerError::BudgetInfeasible {
                drone: d.drone,
                budget: d.budget,
                shortest: req.table.time(d.origin, d.destination),
            });
        }
        per_drone.push(found);
    }

    let combos: u128 = per_drone.iter().map(|c| c.len() as u128).product();
    if combos > MAX_COMBINATIONS {
        return Err(PlannerError::TooLarge(format!("{combos} path combinations")));
    }

    let mut best_value = f64::NEG_INFINITY;
    let mut best_pick = vec![0usize; per_drone.len()];
    let mut pick = vec![0usize; per_drone.len()];
    let mut earliest: HashMap<EdgeId, f64> = HashMap::new();
    loop {
        earliest.clear();
        for (k, &i) in pick.iter().enumerate() {
            for &(e, t) in &per_drone[k][i].scans {
                let slot = earliest.entry(e).or_insert(t);
                if t < *slot {
                    *slot = t;
                }
            }
        }
        let mut value = 0.0;
        for (&e, &t) in &earliest {
            let edge = net.edge(e);
            let gain = edge.beta * edge.length * (req.t_curr + t - req.belief.get(e));
            value += gain.min(edge.r_max).max(0.0);
        }
        if value > best_value + 1e-12 {
            best_value = value;
            best_pick.clone_from(&pick);
        }
        // odometer over candidate indices
        let mut k = 0;
        loop {
            if k == pick.len() {
                let plans = best_pick
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| {
                        DronePlan::timed(
                            req.drones[k].drone,
                            per_drone[k][i].nodes.clone(),
                            req.drones[k].time_offset,
                            net,
                            speed,
                        )
                    })
                    .collect();
                return Ok(PlanResult {
                    plans,
                    objective: best_value,
                    status: PlanStatus::Exhaustive,
                    solve_seconds: 0.0,
                });
            }
            pick[k] += 1;
            if pick[k] < per_drone[k].len() {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    at: NodeId,
    elapsed: f64,
    offset: f64,
    limit: f64,
    dest: NodeId,
    max_edges: usize,
    adjacency: &HashMap<NodeId, Vec<(EdgeId, NodeId, f64)>>,
    req: &ClusterPlanRequest<'_>,
    on_path: &mut [bool],
    nodes: &mut Vec<NodeId>,
    scans: &mut Vec<(EdgeId, f64)>,
    found: &mut Vec<Candidate>,
    overflow: &mut bool,
) {
    if *overflow {
        return;
    }
    if at == dest {
        found.push(Candidate {
            nodes: nodes.clone(),
            scans: scans.clone(),
        });
        if found.len() > MAX_PATHS_PER_DRONE {
            *overflow = true;
        }
        return;
    }
    if scans.len() >= max_edges {
        return;
    }
    let Some(out) = adjacency.get(&at) else { return };
    for &(e, next, dt) in out {
        if on_path[next.0] {
            continue;
        }
        let reach = elapsed + dt;
        if reach + req.table.time(next, dest) > limit {
            continue;
        }
        on_path[next.0] = true;
        nodes.push(next);
        scans.push((e, offset + reach));
        dfs(
            next, reach, offset, limit, dest, max_edges, adjacency, req, on_path, nodes, scans, found, overflow,
        );
        scans.pop();
        nodes.pop();
        on_path[next.0] = false;
    }
}
