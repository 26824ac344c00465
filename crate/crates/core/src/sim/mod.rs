//! Event-driven fleet simulation.
//!
//! Drones cycle through idle, pickup, delivery and charging. Every edge a
//! drone completes is scanned: the realized reward is booked, and the ground
//! truth and the drone's own belief are updated. Pickups and, for
//! strategies that use them, communication clusters hand control to the
//! planning strategy.

pub mod cluster;
mod engine;
pub mod log;
pub mod metrics;
pub mod orders;
pub mod state;

pub use cluster::detect_clusters;
pub use engine::{resolve_stations, run_simulation, DroneInit, RunOptions, Scenario, SimError, SimOutput, Simulation};
pub use log::{EventKind, EventLog, EventRecord};
pub use metrics::{
    compute_metrics, time_series_csv, DeliveryRecord, MetricsLedger, RunMetrics, ScanRecord, SolverCall, Trigger,
};
pub use orders::{generate_orders, OdScheme, Order, OrderStream, UniformOd};
pub use state::{Drone, DroneMode, Leg, Parcel, ParcelStatus};
