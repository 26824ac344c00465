//! Dual-task delivery drone fleets: deliver parcels while scanning road
//! segments for traffic information.
//!
//! The crate is organised bottom-up:
//!
//! * [`network`]: road graph, shortest flight times, ellipsoid pruning;
//! * [`belief`]: last-visit beliefs, meet-and-merge synchronization, AoI;
//! * [`reward`]: saturating information reward;
//! * [`planner`]: cooperative detour MILP, exhaustive oracle, fallback;
//! * [`strategy`]: the four planning policies;
//! * [`sim`]: discrete-event fleet simulation and metrics;
//! * [`config`] and [`experiment`]: scenario files and batch runs.

pub mod belief;
pub mod config;
pub mod experiment;
pub mod network;
pub mod planner;
pub mod reward;
pub mod sim;
pub mod strategy;
