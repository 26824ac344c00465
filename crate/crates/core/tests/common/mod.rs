#![allow(dead_code)]

use dualtask::belief::BeliefMatrix;
use dualtask::network::{all_pairs_shortest_times, NetworkBuilder, NodeId, RoadNetwork, TravelTimeTable};
use dualtask::planner::DroneRequest;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SPEED: f64 = 8.0;

/// Diamond A -> {B, C} -> D with 100 m arms, bidirectional.
pub fn diamond(beta: f64, r_max: f64) -> RoadNetwork {
    let mut b = NetworkBuilder::new();
    b.add_node("A", 0.0, 0.0).unwrap();
    b.add_node("B", 70.0, 70.0).unwrap();
    b.add_node("C", 70.0, -70.0).unwrap();
    b.add_node("D", 140.0, 0.0).unwrap();
    for (u, v) in [("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")] {
        b.add_edge(u, v, 100.0, beta, r_max).unwrap();
    }
    b.build(true).unwrap()
}

pub fn line(n: usize, bidirectional: bool) -> RoadNetwork {
    let mut b = NetworkBuilder::new();
    let names: Vec<String> = (0..n).map(|i| ((b'A' + i as u8) as char).to_string()).collect();
    for (i, name) in names.iter().enumerate() {
        b.add_node(name, i as f64 * 100.0, 0.0).unwrap();
    }
    for w in names.windows(2) {
        b.add_edge(&w[0], &w[1], 100.0, 0.1, 1e6).unwrap();
    }
    b.build(bidirectional).unwrap()
}

pub struct Instance {
    pub network: RoadNetwork,
    pub table: TravelTimeTable,
    pub belief: BeliefMatrix,
    pub t_curr: f64,
    pub drones: Vec<DroneRequest>,
}

/// Random small planning instance: geometric graph of 4..=max_nodes nodes,
/// 1..=max_drones drones, budgets in [1.0, 1.6] x shortest time.
pub fn random_instance(seed: u64, max_nodes: usize, max_drones: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(4..=max_nodes);
        let mut b = NetworkBuilder::new();
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(0.0..400.0), rng.random_range(0.0..400.0)))
            .collect();
        for (i, (x, y)) in pts.iter().enumerate() {
            b.add_node(&format!("v{i}"), *x, *y).unwrap();
        }
        for i in 0..n {
            // link to the 2-3 nearest higher-indexed neighbours plus a random chord
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &c| {
                let da = (pts[a].0 - pts[i].0).hypot(pts[a].1 - pts[i].1);
                let dc = (pts[c].0 - pts[i].0).hypot(pts[c].1 - pts[i].1);
                da.total_cmp(&dc)
            });
            let k = rng.random_range(2..=3);
            for &j in others.iter().take(k) {
                let _ = add_random_edge(&mut b, &mut rng, &pts, i, j);
            }
        }
        let net = match b.build(true) {
            Ok(net) => net,
            Err(_) => continue,
        };
        let table = all_pairs_shortest_times(&net, SPEED);
        let t_curr = rng.random_range(0.0..600.0);
        let belief = BeliefMatrix::from_stamps(
            (0..net.edge_count())
                .map(|_| {
                    if rng.random_bool(0.3) {
                        0.0
                    } else {
                        rng.random_range(0.0..=t_curr)
                    }
                })
                .collect(),
        );
        let k = rng.random_range(1..=max_drones);
        let mut drones = Vec::new();
        for id in 0..k {
            let o = NodeId(rng.random_range(0..n));
            let d = NodeId(rng.random_range(0..n));
            let tau = table.time(o, d);
            if o == d || !tau.is_finite() {
                continue;
            }
            let factor = rng.random_range(1.0..=1.6);
            let offset = if rng.random_bool(0.5) {
                0.0
            } else {
                rng.random_range(0.0..15.0)
            };
            drones.push(DroneRequest {
                drone: id,
                origin: o,
                destination: d,
                time_offset: offset,
                budget: tau * factor,
            });
        }
        if drones.is_empty() {
            continue;
        }
        return Instance {
            network: net,
            table,
            belief,
            t_curr,
            drones,
        };
    }
}

fn add_random_edge(
    b: &mut NetworkBuilder,
    rng: &mut ChaCha8Rng,
    pts: &[(f64, f64)],
    i: usize,
    j: usize,
) -> Result<(), dualtask::network::NetworkError> {
    let len = (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1).max(20.0);
    let beta = if rng.random_bool(0.1) {
        0.0
    } else {
        rng.random_range(0.001..0.05)
    };
    let r_max = rng.random_range(50.0..3000.0);
    let (u, v) = if rng.random_bool(0.5) { (i, j) } else { (j, i) };
    b.add_edge(&format!("v{u}"), &format!("v{v}"), len, beta, r_max)
        .map(|_| ())
}
