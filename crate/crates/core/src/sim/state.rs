//! Drone and parcel state.

use std::collections::VecDeque;

use serde::Serialize;

use crate::belief::BeliefMatrix;
use crate::network::{EdgeId, NodeId, RoadNetwork};

use super::orders::Order;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DroneMode {
    Idle,
    ToPickup,
    Delivering,
    ToCharge,
    Charging,
}

/// The edge a drone is currently flying.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg {
    pub edge: EdgeId,
    pub to: NodeId,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Drone {
    pub id: usize,
    pub mode: DroneMode,
    /// Percent, as of the last node reached.
    pub battery: f64,
    /// Last node reached; the tail of `leg` while flying.
    pub node: NodeId,
    pub leg: Option<Leg>,
    /// Nodes still to visit after the head of `leg`.
    pub route: VecDeque<NodeId>,
    pub parcel: Option<usize>,
    pub belief: BeliefMatrix,
}

impl Drone {
    pub fn new(id: usize, node: NodeId, battery: f64, edge_count: usize) -> Self {
        Self {
            id,
            mode: DroneMode::Idle,
            battery,
            node,
            leg: None,
            route: VecDeque::new(),
            parcel: None,
            belief: BeliefMatrix::new(edge_count),
        }
    }

    /// Charge in percent at time `t`, draining linearly along the current leg.
    pub fn battery_at(&self, t: f64, consumption: f64) -> f64 {
        match &self.leg {
            Some(leg) => self.battery - consumption * (t - leg.start) / 60.0,
            None => self.battery,
        }
    }

    /// Position at time `t`, interpolated along the current leg.
    pub fn position(&self, t: f64, network: &RoadNetwork) -> (f64, f64) {
        let a = network.node(self.node);
        match &self.leg {
            Some(leg) => {
                let b = network.node(leg.to);
                let span = leg.end - leg.start;
                let f = if span > 0.0 {
                    ((t - leg.start) / span).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                (a.x + f * (b.x - a.x), a.y + f * (b.y - a.y))
            }
            None => (a.x, a.y),
        }
    }

    /// The node a new plan may start from and the seconds until it is reached.
    pub fn planning_origin(&self, now: f64) -> (NodeId, f64) {
        match &self.leg {
            Some(leg) => (leg.to, (leg.end - now).max(0.0)),
            None => (self.node, 0.0),
        }
    }

    /// Final node of the current route.
    pub fn route_end(&self) -> NodeId {
        self.route
            .back()
            .copied()
            .or(self.leg.map(|l| l.to))
            .unwrap_or(self.node)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParcelStatus {
    Pending,
    Assigned,
    InFlight,
    Delivered,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parcel {
    pub order: Order,
    /// Shortest pickup-to-drop-off flight time.
    pub shortest: f64,
    pub status: ParcelStatus,
    pub drone: Option<usize>,
    pub picked_up: Option<f64>,
    pub delivered: Option<f64>,
}

impl Parcel {
    pub fn new(order: Order, shortest: f64) -> Self {
        Self {
            order,
            shortest,
            status: ParcelStatus::Pending,
            drone: None,
            picked_up: None,
            delivered: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkBuilder;

    #[test]
    fn interpolates_along_leg() {
        let mut b = NetworkBuilder::new();
        b.add_node("A", 0.0, 0.0).unwrap();
        b.add_node("B", 160.0, 0.0).unwrap();
        b.add_edge("A", "B", 160.0, 0.1, 100.0).unwrap();
        let net = b.build(true).unwrap();
        let mut d = Drone::new(0, NodeId(0), 50.0, net.edge_count());
        d.leg = Some(Leg {
            edge: net.find_edge(NodeId(0), NodeId(1)).unwrap(),
            to: NodeId(1),
            start: 0.0,
            end: 20.0,
        });
        assert_eq!(d.position(5.0, &net), (40.0, 0.0));
        assert_eq!(d.position(25.0, &net), (160.0, 0.0));
        assert_eq!(d.planning_origin(5.0), (NodeId(1), 15.0));
        assert!((d.battery_at(20.0, 1.68) - (50.0 - 0.56)).abs() < 1e-12);
    }
}
