//! Poisson order stream.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::network::{NodeId, RoadNetwork, TravelTimeTable};

/// A delivery request as released into the simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Order {
    pub id: usize,
    pub created: f64,
    pub origin: NodeId,
    pub destination: NodeId,
}

/// Chooses pickup and drop-off nodes for a new order.
pub trait OdScheme {
    /// `None` if no acceptable pair could be drawn; the order is then dropped.
    fn draw(&self, rng: &mut ChaCha8Rng, network: &RoadNetwork, table: &TravelTimeTable) -> Option<(NodeId, NodeId)>;
}

/// Uniform over ordered node pairs whose shortest route is at least
/// `min_trip_length` meters long.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformOd {
    pub min_trip_length: f64,
}

const MAX_DRAW_ATTEMPTS: usize = 1000;

impl OdScheme for UniformOd {
    fn draw(&self, rng: &mut ChaCha8Rng, network: &RoadNetwork, table: &TravelTimeTable) -> Option<(NodeId, NodeId)> {
        let n = network.node_count();
        if n < 2 {
            return None;
        }
        for _ in 0..MAX_DRAW_ATTEMPTS {
            let o = NodeId(rng.random_range(0..n));
            let d = NodeId(rng.random_range(0..n));
            if o == d {
                continue;
            }
            let meters = table.time(o, d) * table.speed();
            if meters.is_finite() && meters >= self.min_trip_length {
                return Some((o, d));
            }
        }
        None
    }
}

/// Result of [`generate_orders`]; `dropped` counts arrivals for which the
/// scheme found no acceptable pair.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderStream {
    pub orders: Vec<Order>,
    pub dropped: Vec<f64>,
}

/// Arrivals with exponential inter-arrival times of rate `rate` on
/// `[0, horizon)`, stopping after `cap` accepted orders.
pub fn generate_orders(
    rate: f64,
    horizon: f64,
    cap: Option<usize>,
    scheme: &dyn OdScheme,
    network: &RoadNetwork,
    table: &TravelTimeTable,
    rng: &mut ChaCha8Rng,
) -> OrderStream {
    let mut stream = OrderStream {
        orders: Vec::new(),
        dropped: Vec::new(),
    };
    let Ok(gap) = Exp::new(rate) else {
        return stream;
    };
    let mut t = 0.0;
    loop {
        t += gap.sample(rng);
        if t >= horizon || cap.is_some_and(|c| stream.orders.len() >= c) {
            return stream;
        }
        match scheme.draw(rng, network, table) {
            Some((origin, destination)) => stream.orders.push(Order {
                id: stream.orders.len(),
                created: t,
                origin,
                destination,
            }),
            None => stream.dropped.push(t),
        }
    }
}
