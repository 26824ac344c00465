//! Discrete-event loop.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::belief::{record_scan, GroundTruthVisits};
use crate::config::{SimConfig, StationPlacement};
use crate::network::{all_pairs_shortest_times, NetworkError, NodeId, RoadNetwork, TravelTimeTable};
use crate::planner::{DronePlan, MilpBackend, TIME_EPS};
use crate::reward::{realized_reward, RewardParams};
use crate::strategy::{make_strategy, PlanningContext, PlanningStrategy};

use super::cluster::detect_clusters;
use super::log::{EventKind, EventLog, EventRecord};
use super::metrics::{compute_metrics, DeliveryRecord, MetricsLedger, RunMetrics, ScanRecord};
use super::orders::{generate_orders, Order, UniformOd};
use super::state::{Drone, DroneMode, Leg, Parcel, ParcelStatus};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("charging station `{0}` is not a node of the network")]
    UnknownStation(String),
    #[error("network has no nodes")]
    EmptyNetwork,
    #[error("initial drone {drone} is placed on node {node} outside the network")]
    BadPlacement { drone: usize, node: usize },
    #[error("order {order} refers to a node outside the network")]
    BadOrder { order: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroneInit {
    pub node: NodeId,
    /// Percent.
    pub battery: f64,
}

/// Initial fleet and the complete order stream of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub drones: Vec<DroneInit>,
    pub orders: Vec<Order>,
    /// Arrival times of orders for which no pickup/drop-off pair was found.
    pub dropped_orders: Vec<f64>,
}

impl Scenario {
    /// Random placement, initial charge and Poisson orders, all derived from
    /// `cfg.seed` through independent streams.
    pub fn generate(cfg: &SimConfig, network: &RoadNetwork, table: &TravelTimeTable) -> Self {
        let stream = |k: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k);
            rng
        };
        let mut placement = stream(1);
        let mut charge = stream(2);
        let drones = (0..cfg.drones)
            .map(|_| DroneInit {
                node: NodeId(placement.random_range(0..network.node_count().max(1))),
                battery: if cfg.battery_max > cfg.battery_min {
                    charge.random_range(cfg.battery_min..cfg.battery_max)
                } else {
                    cfg.battery_min
                },
            })
            .collect();
        let scheme = UniformOd {
            min_trip_length: cfg.min_trip_length,
        };
        let orders = generate_orders(
            cfg.order_rate,
            cfg.horizon,
            cfg.max_parcels,
            &scheme,
            network,
            table,
            &mut stream(3),
        );
        Self {
            drones,
            orders: orders.orders,
            dropped_orders: orders.dropped,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Write every solver model to this directory in LP format.
    pub model_dump: Option<PathBuf>,
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub log: EventLog,
    pub ledger: MetricsLedger,
    pub metrics: RunMetrics,
    pub time_series: Vec<(f64, f64)>,
    pub parcels: Vec<Parcel>,
    pub drones: Vec<Drone>,
    pub truth: GroundTruthVisits,
    /// Simulation time at which the run stopped.
    pub end_time: f64,
}

/// Charging stations for `placement`: named nodes, or the nodes closest to
/// evenly spaced points on the bounding-box diagonal.
pub fn resolve_stations(network: &RoadNetwork, placement: &StationPlacement) -> Result<Vec<NodeId>, SimError> {
    if network.node_count() == 0 {
        return Err(SimError::EmptyNetwork);
    }
    let mut out = Vec::new();
    match placement {
        StationPlacement::Nodes(names) => {
            for name in names {
                let id = network
                    .node_by_name(name)
                    .ok_or_else(|| SimError::UnknownStation(name.clone()))?;
                out.push(id);
            }
        }
        StationPlacement::Auto(count) => {
            let nodes = network.nodes();
            let fold = |f: fn(f64, f64) -> f64, init: f64, pick: fn(&crate::network::Node) -> f64| {
                nodes.iter().map(pick).fold(init, f)
            };
            let (x0, x1) = (
                fold(f64::min, f64::INFINITY, |n| n.x),
                fold(f64::max, f64::NEG_INFINITY, |n| n.x),
            );
            let (y0, y1) = (
                fold(f64::min, f64::INFINITY, |n| n.y),
                fold(f64::max, f64::NEG_INFINITY, |n| n.y),
            );
            for i in 0..*count {
                let f = (i + 1) as f64 / (*count + 1) as f64;
                let (px, py) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
                let best = network
                    .node_ids()
                    .min_by(|&a, &b| {
                        let (na, nb) = (network.node(a), network.node(b));
                        let da = (na.x - px).hypot(na.y - py);
                        let db = (nb.x - px).hypot(nb.y - py);
                        da.total_cmp(&db).then(a.cmp(&b))
                    })
                    .expect("network has nodes");
                out.push(best);
            }
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Action {
    Arrive(usize),
    ChargeDone(usize),
    Release(usize),
    Proximity,
}

impl Action {
    /// Order among simultaneous events: movement first, then charging,
    /// then new orders, then the proximity check.
    fn rank(self) -> u8 {
        match self {
            Action::Arrive(_) => 0,
            Action::ChargeDone(_) => 1,
            Action::Release(_) => 2,
            Action::Proximity => 3,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Scheduled {
    time: f64,
    seq: u64,
    action: Action,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // reversed: BinaryHeap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.action.rank().cmp(&self.action.rank()))
            .then(other.seq.cmp(&self.seq))
    }
}

pub struct Simulation<'a> {
    cfg: &'a SimConfig,
    network: &'a RoadNetwork,
    table: TravelTimeTable,
    stations: Vec<NodeId>,
    nearest_station: Vec<NodeId>,
    charger_time: Vec<f64>,
    backend: &'a dyn MilpBackend,
    strategy: Box<dyn PlanningStrategy>,
    options: RunOptions,

    now: f64,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    drones: Vec<Drone>,
    orders: Vec<Order>,
    parcels: Vec<Parcel>,
    pending: Vec<usize>,
    truth: GroundTruthVisits,
    ledger: MetricsLedger,
    log: EventLog,
}

/// Generates the scenario from `cfg.seed` and runs it.
pub fn run_simulation(
    cfg: &SimConfig,
    network: &RoadNetwork,
    backend: &dyn MilpBackend,
    options: RunOptions,
) -> Result<SimOutput, SimError> {
    let table = all_pairs_shortest_times(network, cfg.speed);
    let scenario = Scenario::generate(cfg, network, &table);
    Ok(Simulation::with_table(cfg, network, table, scenario, backend, options)?.run())
}

impl<'a> Simulation<'a> {
    pub fn new(
        cfg: &'a SimConfig,
        network: &'a RoadNetwork,
        scenario: Scenario,
        backend: &'a dyn MilpBackend,
        options: RunOptions,
    ) -> Result<Self, SimError> {
        let table = all_pairs_shortest_times(network, cfg.speed);
        Self::with_table(cfg, network, table, scenario, backend, options)
    }

    fn with_table(
        cfg: &'a SimConfig,
        network: &'a RoadNetwork,
        table: TravelTimeTable,
        scenario: Scenario,
        backend: &'a dyn MilpBackend,
        options: RunOptions,
    ) -> Result<Self, SimError> {
        cfg.validate().map_err(SimError::Config)?;
        let stations = resolve_stations(network, &cfg.stations)?;
        let n = network.node_count();
        let mut nearest_station = Vec::with_capacity(n);
        let mut charger_time = Vec::with_capacity(n);
        for v in network.node_ids() {
            let best = stations
                .iter()
                .copied()
                .min_by(|&a, &b| table.time(v, a).total_cmp(&table.time(v, b)).then(a.cmp(&b)))
                .expect("at least one station");
            nearest_station.push(best);
            charger_time.push(table.time(v, best));
        }
        let edges = network.edge_count();
        let mut drones = Vec::with_capacity(scenario.drones.len());
        for (id, init) in scenario.drones.iter().enumerate() {
            if init.node.0 >= n {
                return Err(SimError::BadPlacement {
                    drone: id,
                    node: init.node.0,
                });
            }
            drones.push(Drone::new(id, init.node, init.battery, edges));
        }
        for o in &scenario.orders {
            if o.origin.0 >= n || o.destination.0 >= n {
                return Err(SimError::BadOrder { order: o.id });
            }
        }
        let mut sim = Self {
            cfg,
            network,
            table,
            stations,
            nearest_station,
            charger_time,
            backend,
            strategy: make_strategy(cfg.strategy),
            options,
            now: 0.0,
            queue: BinaryHeap::new(),
            seq: 0,
            drones,
            orders: scenario.orders,
            parcels: Vec::new(),
            pending: Vec::new(),
            truth: GroundTruthVisits::new(edges),
            ledger: MetricsLedger::default(),
            log: EventLog::default(),
        };
        for t in scenario.dropped_orders {
            sim.log.push(EventRecord::new(t, EventKind::OrderDropped));
        }
        for i in 0..sim.orders.len() {
            sim.schedule(sim.orders[i].created, Action::Release(i));
        }
        if sim.strategy.uses_clusters() {
            sim.schedule(cfg.proximity_interval, Action::Proximity);
        }
        Ok(sim)
    }

    pub fn stations(&self) -> &[NodeId] {
        &self.stations
    }

    fn schedule(&mut self, time: f64, action: Action) {
        self.seq += 1;
        self.queue.push(Scheduled {
            time,
            seq: self.seq,
            action,
        });
    }

    pub fn run(mut self) -> SimOutput {
        while let Some(ev) = self.queue.pop() {
            if ev.time > self.cfg.horizon {
                break;
            }
            self.now = ev.time;
            match ev.action {
                Action::Arrive(k) => self.arrive(k),
                Action::ChargeDone(k) => self.charge_done(k),
                Action::Release(i) => self.release(i),
                Action::Proximity => self.proximity(),
            }
            if self.finished() {
                break;
            }
        }
        let end_time = self.now;
        self.log.push(EventRecord::new(end_time, EventKind::End));
        let metrics = compute_metrics(
            &self.ledger,
            &self.truth,
            self.cfg.horizon,
            self.cfg.strategy,
            self.cfg.seed,
            self.orders.len(),
        );
        let time_series = self.ledger.time_series(self.cfg.sample_interval, self.cfg.horizon);
        SimOutput {
            log: self.log,
            ledger: self.ledger,
            metrics,
            time_series,
            parcels: self.parcels,
            drones: self.drones,
            truth: self.truth,
            end_time,
        }
    }

    /// All orders released and every parcel delivered or failed.
    fn finished(&self) -> bool {
        self.parcels.len() == self.orders.len()
            && self
                .parcels
                .iter()
                .all(|p| matches!(p.status, ParcelStatus::Delivered | ParcelStatus::Failed))
    }

    fn start_leg(&mut self, k: usize, next: NodeId) {
        let d = &mut self.drones[k];
        let edge = self
            .network
            .find_edge(d.node, next)
            .expect("routes only follow network edges");
        let end = self.now + self.network.edge(edge).length / self.cfg.speed;
        d.leg = Some(Leg {
            edge,
            to: next,
            start: self.now,
            end,
        });
        self.schedule(end, Action::Arrive(k));
    }

    /// Sends an idle drone along `path` (starting at its node), or returns
    /// `false` if it is already at the end.
    fn depart(&mut self, k: usize, path: Vec<NodeId>) -> bool {
        let d = &mut self.drones[k];
        debug_assert_eq!(path.first(), Some(&d.node));
        d.route = path.into_iter().skip(1).collect();
        match d.route.pop_front() {
            Some(next) => {
                self.start_leg(k, next);
                true
            }
            None => false,
        }
    }

    fn arrive(&mut self, k: usize) {
        let cfg = self.cfg;
        let now = self.now;
        let d = &mut self.drones[k];
        let leg = d.leg.take().expect("arrival without a leg");
        d.battery -= cfg.consumption_rate * (leg.end - leg.start) / 60.0;
        debug_assert!(d.battery > -1e-6, "drone {k} ran out of battery");
        d.node = leg.to;
        if d.mode == DroneMode::Delivering || cfg.scan_when_empty {
            let params = RewardParams::of(self.network.edge(leg.edge));
            let reward = realized_reward(&params, now, self.truth.last_visit(leg.edge));
            record_scan(&mut d.belief, &mut self.truth, leg.edge, now).expect("beliefs cover every edge");
            self.ledger.scans.push(ScanRecord {
                time: now,
                drone: k,
                edge: leg.edge,
                reward,
            });
            self.log.push(
                EventRecord::new(now, EventKind::Scan)
                    .drone(k)
                    .edge(self.network.edge_label(leg.edge))
                    .reward(reward)
                    .battery(d.battery),
            );
        }
        let d = &mut self.drones[k];
        if let Some(next) = d.route.pop_front() {
            self.start_leg(k, next);
            return;
        }
        match d.mode {
            DroneMode::ToPickup => self.pickup(k),
            DroneMode::Delivering => self.deliver(k),
            DroneMode::ToCharge => self.start_charging(k),
            DroneMode::Idle | DroneMode::Charging => unreachable!("drone {k} flew while {:?}", d.mode),
        }
    }

    fn pickup(&mut self, k: usize) {
        let p = self.drones[k].parcel.expect("picking up without a parcel");
        let parcel = &mut self.parcels[p];
        parcel.status = ParcelStatus::InFlight;
        parcel.picked_up = Some(self.now);
        let destination = parcel.order.destination;
        self.drones[k].mode = DroneMode::Delivering;
        self.log.push(
            EventRecord::new(self.now, EventKind::Pickup)
                .drone(k)
                .parcel(p)
                .node(&self.network.node(self.drones[k].node).name)
                .battery(self.drones[k].battery),
        );
        if self.table.time(self.drones[k].node, destination).is_infinite() {
            self.fail_parcel(k, p);
            return;
        }
        let plans = self.plan(|strategy, ctx, drones| strategy.on_pickup(ctx, drones, k));
        self.apply_plans(plans);
        let d = &self.drones[k];
        if d.leg.is_none() && d.node != destination {
            // the strategy left the drone without a route
            let path = self
                .table
                .path(d.node, destination)
                .expect("reachability checked above");
            self.depart(k, path);
        }
    }

    fn fail_parcel(&mut self, k: usize, p: usize) {
        self.parcels[p].status = ParcelStatus::Failed;
        self.ledger.failed_parcels.push(p);
        let d = &mut self.drones[k];
        d.parcel = None;
        d.mode = DroneMode::Idle;
        self.log.push(
            EventRecord::new(self.now, EventKind::Fallback)
                .drone(k)
                .parcel(p)
                .detail("drop-off unreachable"),
        );
        self.try_assign(k);
    }

    fn deliver(&mut self, k: usize) {
        let p = self.drones[k].parcel.take().expect("delivering without a parcel");
        let parcel = &mut self.parcels[p];
        debug_assert_eq!(parcel.order.destination, self.drones[k].node);
        parcel.status = ParcelStatus::Delivered;
        parcel.delivered = Some(self.now);
        self.ledger.deliveries.push(DeliveryRecord {
            parcel: p,
            drone: k,
            picked_up: parcel.picked_up.expect("delivered parcels were picked up"),
            delivered: self.now,
            shortest: parcel.shortest,
        });
        self.drones[k].mode = DroneMode::Idle;
        self.log.push(
            EventRecord::new(self.now, EventKind::Deliver)
                .drone(k)
                .parcel(p)
                .node(&self.network.node(self.drones[k].node).name)
                .battery(self.drones[k].battery),
        );
        self.try_assign(k);
    }

    fn start_charging(&mut self, k: usize) {
        let d = &mut self.drones[k];
        d.mode = DroneMode::Charging;
        let duration = (100.0 - d.battery).max(0.0) / self.cfg.charging_rate * 60.0;
        self.log.push(
            EventRecord::new(self.now, EventKind::ChargeStart)
                .drone(k)
                .node(&self.network.node(d.node).name)
                .battery(d.battery),
        );
        self.schedule(self.now + duration, Action::ChargeDone(k));
    }

    fn charge_done(&mut self, k: usize) {
        let d = &mut self.drones[k];
        d.battery = 100.0;
        d.mode = DroneMode::Idle;
        self.log
            .push(EventRecord::new(self.now, EventKind::ChargeEnd).drone(k).battery(100.0));
        self.try_assign(k);
    }

    fn release(&mut self, i: usize) {
        let order = self.orders[i];
        let shortest = self.table.time(order.origin, order.destination);
        let id = self.parcels.len();
        self.parcels.push(Parcel::new(order, shortest));
        self.pending.push(id);
        self.log
            .push(EventRecord::new(self.now, EventKind::Order).parcel(id).detail(format!(
                "{}->{}",
                self.network.node(order.origin).name,
                self.network.node(order.destination).name
            )));
        for k in 0..self.drones.len() {
            if self.pending.is_empty() {
                break;
            }
            if self.drones[k].mode == DroneMode::Idle {
                self.try_assign(k);
            }
        }
    }

    /// Energy, in percent, to fly `seconds`.
    fn energy(&self, seconds: f64) -> f64 {
        self.cfg.consumption_rate * seconds / 60.0
    }

    /// Gives an idle drone the nearest pending parcel it can deliver and still
    /// reach a charger; otherwise sends it to charge if parcels are waiting.
    fn try_assign(&mut self, k: usize) {
        debug_assert_eq!(self.drones[k].mode, DroneMode::Idle);
        let (v, battery) = (self.drones[k].node, self.drones[k].battery);
        let usable = self.cfg.battery_reserve * battery;
        let best = self
            .pending
            .iter()
            .enumerate()
            .filter(|(_, &p)| {
                let o = &self.parcels[p].order;
                let trip = self.table.time(v, o.origin) + self.parcels[p].shortest + self.charger_time[o.destination.0];
                self.energy(trip) <= usable
            })
            .min_by(|(_, &a), (_, &b)| {
                let (pa, pb) = (&self.parcels[a].order, &self.parcels[b].order);
                self.table
                    .time(v, pa.origin)
                    .total_cmp(&self.table.time(v, pb.origin))
                    .then(pa.created.total_cmp(&pb.created))
                    .then(a.cmp(&b))
            })
            .map(|(slot, &p)| (slot, p));

        if let Some((slot, p)) = best {
            self.pending.remove(slot);
            let parcel = &mut self.parcels[p];
            parcel.status = ParcelStatus::Assigned;
            parcel.drone = Some(k);
            let origin = parcel.order.origin;
            let d = &mut self.drones[k];
            d.parcel = Some(p);
            d.mode = DroneMode::ToPickup;
            self.log.push(
                EventRecord::new(self.now, EventKind::Assign)
                    .drone(k)
                    .parcel(p)
                    .battery(battery),
            );
            let path = self.table.path(v, origin).expect("feasible parcels are reachable");
            if !self.depart(k, path) {
                self.pickup(k);
            }
        } else if !self.pending.is_empty() && battery < 100.0 - TIME_EPS {
            let station = self.nearest_station[v.0];
            self.drones[k].mode = DroneMode::ToCharge;
            self.log.push(
                EventRecord::new(self.now, EventKind::ToCharge)
                    .drone(k)
                    .node(&self.network.node(station).name)
                    .battery(battery),
            );
            let path = self.table.path(v, station).expect("stations are reachable");
            if !self.depart(k, path) {
                self.start_charging(k);
            }
        }
    }

    fn proximity(&mut self) {
        let positions: Vec<(usize, f64, f64)> = self
            .drones
            .iter()
            .filter(|d| d.mode == DroneMode::Delivering)
            .map(|d| {
                let (x, y) = d.position(self.now, self.network);
                (d.id, x, y)
            })
            .collect();
        for cluster in detect_clusters(&positions, self.cfg.comm_radius) {
            let plans = self.plan(|strategy, ctx, drones| strategy.on_cluster(ctx, drones, &cluster));
            self.apply_plans(plans);
        }
        let next = self.now + self.cfg.proximity_interval;
        if next <= self.cfg.horizon {
            self.schedule(next, Action::Proximity);
        }
    }

    fn plan<F>(&mut self, f: F) -> Vec<DronePlan>
    where
        F: FnOnce(&mut dyn PlanningStrategy, &mut PlanningContext<'_>, &mut [Drone]) -> Vec<DronePlan>,
    {
        let mut ctx = PlanningContext {
            now: self.now,
            network: self.network,
            table: &self.table,
            config: self.cfg,
            truth: &self.truth,
            parcels: &self.parcels,
            charger_time: &self.charger_time,
            backend: self.backend,
            ledger: &mut self.ledger,
            log: &mut self.log,
            model_dump: self.options.model_dump.as_deref(),
        };
        f(self.strategy.as_mut(), &mut ctx, &mut self.drones)
    }

    fn apply_plans(&mut self, plans: Vec<DronePlan>) {
        for plan in plans {
            let k = plan.drone;
            let (origin, _) = self.drones[k].planning_origin(self.now);
            assert_eq!(
                plan.nodes[0], origin,
                "plan for drone {k} does not start at its planning origin"
            );
            let d = &mut self.drones[k];
            d.route = plan.nodes[1..].iter().copied().collect();
            if d.leg.is_none() {
                if let Some(next) = d.route.pop_front() {
                    self.start_leg(k, next);
                }
            }
        }
    }
}
