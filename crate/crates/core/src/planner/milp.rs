//! Joint detour MILP.
//!
//! Variables per drone `k` and edge `e = (i, j)`:
//! * `x[k][e]` binary, drone `k` flies `e`;
//! * `t[k][v]` arrival time of `k` at node `v`, relative to `t_curr`;
//!
//! and per edge: `y[e]` binary coverage, `scan[e]` planned scan time and
//! `reward[e]` collected reward. Only edges that fit inside drone `k`'s own
//! detour ellipse get an `x` column for `k`; the others could never lie on a
//! budget-feasible path.

use std::collections::BTreeMap;

use crate::network::{budget_slack, EdgeId, NodeId};

use super::backend::{LinearModel, RawSolution, Sense, SolveStatus, VarId};
use super::{ClusterPlanRequest, DronePlan, PlanResult, PlanStatus, PlannerError};

/// Columns of one drone's flow and timing sub-model.
#[derive(Debug, Clone)]
pub(crate) struct DroneColumns {
    pub x: BTreeMap<EdgeId, VarId>,
    pub t: BTreeMap<NodeId, VarId>,
    /// Bounds of each `t` column.
    pub window: BTreeMap<NodeId, (f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    pub lp: LinearModel,
    pub big_m: f64,
    /// `None` for drones already at their destination.
    pub(crate) drones: Vec<Option<DroneColumns>>,
    pub(crate) coverage: BTreeMap<EdgeId, VarId>,
    pub(crate) scan: BTreeMap<EdgeId, VarId>,
    pub(crate) reward: BTreeMap<EdgeId, VarId>,
}

impl MilpModel {
    /// Number of `x` columns of drone `k` (zero for a drone at its destination).
    pub fn traversal_vars(&self, k: usize) -> usize {
        self.drones[k].as_ref().map_or(0, |d| d.x.len())
    }

    pub fn coverage_vars(&self) -> usize {
        self.coverage.len()
    }

    /// Drones (by request index) that own an `x` column for `edge`.
    pub fn coverers(&self, edge: EdgeId) -> Vec<usize> {
        self.drones
            .iter()
            .enumerate()
            .filter(|(_, d)| d.as_ref().is_some_and(|d| d.x.contains_key(&edge)))
            .map(|(k, _)| k)
            .collect()
    }

    pub fn x_var(&self, k: usize, edge: EdgeId) -> Option<VarId> {
        self.drones[k].as_ref().and_then(|d| d.x.get(&edge).copied())
    }

    pub fn t_var(&self, k: usize, node: NodeId) -> Option<VarId> {
        self.drones[k].as_ref().and_then(|d| d.t.get(&node).copied())
    }

    pub fn coverage_var(&self, edge: EdgeId) -> Option<VarId> {
        self.coverage.get(&edge).copied()
    }

    pub fn scan_var(&self, edge: EdgeId) -> Option<VarId> {
        self.scan.get(&edge).copied()
    }

    pub fn reward_var(&self, edge: EdgeId) -> Option<VarId> {
        self.reward.get(&edge).copied()
    }
}

pub fn build_milp(req: &ClusterPlanRequest<'_>) -> Result<MilpModel, PlannerError> {
    req.validate()?;
    let net = req.network;
    let table = req.table;
    let speed = table.speed();
    let tau = |e: EdgeId| net.edge(e).length / speed;

    let horizon = req
        .drones
        .iter()
        .map(|d| d.budget + d.time_offset)
        .fold(0.0_f64, f64::max);
    let max_tau = req.subnetwork.edges.iter().map(|&e| tau(e)).fold(0.0_f64, f64::max);
    let big_m = horizon + max_tau;

    let mut lp = LinearModel::new(Sense::Maximize);
    let mut drones = Vec::with_capacity(req.drones.len());

    for (k, d) in req.drones.iter().enumerate() {
        if d.origin == d.destination {
            drones.push(None);
            continue;
        }
        let slack = budget_slack(d.budget);
        let allowed: Vec<EdgeId> = req
            .subnetwork
            .edges
            .iter()
            .copied()
            .filter(|&e| {
                let edge = net.edge(e);
                table.time(d.origin, edge.from) + tau(e) + table.time(edge.to, d.destination) <= d.budget + slack
            })
            .collect();
        let mut x = BTreeMap::new();
        for &e in &allowed {
            x.insert(e, lp.add_binary(format!("x_{k}_{}", e.0), 0.0));
        }
        let mut nodes: Vec<NodeId> = allowed
            .iter()
            .flat_map(|&e| [net.edge(e).from, net.edge(e).to])
            .chain([d.origin, d.destination])
            .collect();
        nodes.sort();
        nodes.dedup();
        let mut t = BTreeMap::new();
        let mut window = BTreeMap::new();
        for &v in &nodes {
            let lo = d.time_offset + table.time(d.origin, v);
            let hi = d.time_offset + d.budget - table.time(v, d.destination);
            let (lo, hi) = if lo.is_finite() && hi.is_finite() {
                (lo.min(hi), hi.max(lo))
            } else {
                (0.0, d.time_offset + d.budget)
            };
            let (lo, hi) = (lo.max(0.0), hi.max(0.0));
            t.insert(v, lp.add_var(format!("t_{k}_{}", v.0), lo, hi, 0.0));
            window.insert(v, (lo, hi));
        }

        // route starts at the planning origin and ends at the destination; flow
        // is conserved elsewhere
        for &v in &nodes {
            let mut terms = Vec::new();
            for e in net.out_edges(v) {
                if let Some(&var) = x.get(e) {
                    terms.push((var, 1.0));
                }
            }
            for e in net.in_edges(v) {
                if let Some(&var) = x.get(e) {
                    terms.push((var, -1.0));
                }
            }
            let rhs = if v == d.origin {
                1.0
            } else if v == d.destination {
                -1.0
            } else {
                0.0
            };
            lp.equal(format!("flow_{k}_{}", v.0), terms, rhs);
        }

        // arrival times strictly increase along a flown path, so no node is
        // entered twice and no edge is flown in both directions; stating this
        // explicitly tightens the relaxation considerably on grid-like graphs
        for &v in &nodes {
            let terms: Vec<(VarId, f64)> = net
                .in_edges(v)
                .iter()
                .filter_map(|e| x.get(e).map(|&var| (var, 1.0)))
                .collect();
            if terms.len() > 1 {
                lp.le(
                    format!("enter_{k}_{}", v.0),
                    terms,
                    if v == d.origin { 0.0 } else { 1.0 },
                );
            }
        }
        for &e in &allowed {
            let edge = net.edge(e);
            if let Some(back) = net.find_edge(edge.to, edge.from) {
                if back > e {
                    if let Some(&xb) = x.get(&back) {
                        lp.le(format!("twin_{k}_{}", e.0), vec![(x[&e], 1.0), (xb, 1.0)], 1.0);
                    }
                }
            }
        }

        // total flight time fits the budget; implied by the time rows for
        // integral x but much stronger in the relaxation
        lp.le(
            format!("length_{k}"),
            allowed.iter().map(|e| (x[e], tau(*e))).collect(),
            d.budget + slack,
        );

        lp.equal(format!("offset_{k}"), vec![(t[&d.origin], 1.0)], d.time_offset);

        // arrival at the head of a flown edge is exactly the tail arrival plus
        // the flight time; relaxed otherwise. Each row uses the smallest
        // coefficient that relaxes it over the time windows, never more than
        // the uniform big-M.
        for &e in &allowed {
            let edge = net.edge(e);
            let (ti, tj, xe) = (t[&edge.from], t[&edge.to], x[&e]);
            let (lo_i, hi_i) = window[&edge.from];
            let (lo_j, hi_j) = window[&edge.to];
            let m_lo = (hi_i + tau(e) - lo_j).clamp(0.0, big_m);
            let m_hi = (hi_j - lo_i - tau(e)).clamp(0.0, big_m);
            lp.ge(
                format!("arrive_lo_{k}_{}", e.0),
                vec![(tj, 1.0), (ti, -1.0), (xe, -m_lo)],
                tau(e) - m_lo,
            );
            lp.le(
                format!("arrive_hi_{k}_{}", e.0),
                vec![(tj, 1.0), (ti, -1.0), (xe, m_hi)],
                tau(e) + m_hi,
            );
        }

        lp.le(
            format!("budget_{k}"),
            vec![(t[&d.destination], 1.0)],
            d.budget + d.time_offset,
        );
        drones.push(Some(DroneColumns { x, t, window }));
    }

    let mut covered: Vec<EdgeId> = drones.iter().flatten().flat_map(|d| d.x.keys().copied()).collect();
    covered.sort();
    covered.dedup();

    let mut coverage = BTreeMap::new();
    let mut scan = BTreeMap::new();
    let mut reward = BTreeMap::new();
    for &e in &covered {
        let edge = net.edge(e);
        let rate = edge.beta * edge.length;
        // latest possible head arrival among the coverers
        let latest = drones
            .iter()
            .flatten()
            .filter(|cols| cols.x.contains_key(&e))
            .map(|cols| cols.window[&edge.to].1)
            .fold(0.0_f64, f64::max)
            .min(horizon);
        let y = lp.add_binary(format!("y_{}", e.0), 0.0);
        let s = lp.add_var(format!("s_{}", e.0), 0.0, latest, 0.0);
        let r = lp.add_var(format!("r_{}", e.0), 0.0, edge.r_max, 1.0);

        let mut cover_terms: Vec<(VarId, f64)> = Vec::new();
        for (k, cols) in drones.iter().enumerate() {
            let Some(cols) = cols else { continue };
            let Some(&xe) = cols.x.get(&e) else { continue };
            cover_terms.push((xe, 1.0));
            // the scan happens at the earliest coverer's head arrival
            let m = (latest - cols.window[&edge.to].0).clamp(0.0, big_m);
            lp.le(
                format!("scan_{k}_{}", e.0),
                vec![(s, 1.0), (cols.t[&edge.to], -1.0), (xe, m)],
                m,
            );
        }
        cover_terms.push((y, -1.0));
        lp.ge(format!("cover_{}", e.0), cover_terms, 0.0);
        lp.le(
            format!("gain_{}", e.0),
            vec![(r, 1.0), (s, -rate)],
            rate * (req.t_curr - req.belief.get(e)),
        );
        lp.le(format!("cap_{}", e.0), vec![(r, 1.0), (y, -edge.r_max)], 0.0);
        coverage.insert(e, y);
        scan.insert(e, s);
        reward.insert(e, r);
    }

    Ok(MilpModel {
        lp,
        big_m,
        drones,
        coverage,
        scan,
        reward,
    })
}

/// Walks each drone's selected edges from its planning origin to its
/// destination. Where several selected edges leave a node, the one whose head
/// is reached earliest is followed.
///
/// Panics if a drone's selection does not contain an origin-to-destination
/// walk; that can only happen if the model is wrong.
pub fn extract_paths(model: &MilpModel, raw: &RawSolution, req: &ClusterPlanRequest<'_>) -> PlanResult {
    let net = req.network;
    let speed = req.table.speed();
    let mut plans = Vec::with_capacity(req.drones.len());
    for (k, d) in req.drones.iter().enumerate() {
        let Some(cols) = &model.drones[k] else {
            plans.push(DronePlan {
                drone: d.drone,
                nodes: vec![d.origin],
                arrivals: vec![d.time_offset],
            });
            continue;
        };
        let mut nodes = vec![d.origin];
        let mut used = std::collections::BTreeSet::new();
        let mut cur = d.origin;
        while cur != d.destination {
            let next = net
                .out_edges(cur)
                .iter()
                .filter(|e| !used.contains(*e))
                .filter_map(|e| cols.x.get(e).map(|var| (*e, *var)))
                .filter(|(_, var)| raw.values[var.0] > 0.5)
                .min_by(|(a, _), (b, _)| {
                    let ta = raw.values[cols.t[&net.edge(*a).to].0];
                    let tb = raw.values[cols.t[&net.edge(*b).to].0];
                    ta.total_cmp(&tb).then(a.cmp(b))
                });
            let (e, _) = next.unwrap_or_else(|| {
                panic!(
                    "drone {}: selected edges leave no walk from {:?} to {:?}",
                    d.drone, d.origin, d.destination
                )
            });
            used.insert(e);
            cur = net.edge(e).to;
            nodes.push(cur);
        }
        plans.push(DronePlan::timed(d.drone, nodes, d.time_offset, net, speed));
    }
    PlanResult {
        plans,
        objective: raw.objective,
        status: match raw.status {
            SolveStatus::Optimal => PlanStatus::Optimal,
            SolveStatus::TimeLimited => PlanStatus::TimeLimited,
        },
        solve_seconds: 0.0,
    }
}
