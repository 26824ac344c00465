use dualtask::config::{NetworkSource, SimConfig, StrategyTag};
use dualtask::planner::{HighsBackend, LinearModel, MilpBackend, PlanStatus, RawSolution, SolveError, SolveLimits};
use dualtask::sim::{run_simulation, EventKind, RunOptions, SimOutput, Trigger};
use dualtask::strategy::make_strategy;

struct AlwaysInfeasible;

impl MilpBackend for AlwaysInfeasible {
    fn name(&self) -> &'static str {
        "infeasible"
    }

    fn solve(&self, _model: &LinearModel, _limits: &SolveLimits) -> Result<RawSolution, SolveError> {
        Err(SolveError::Infeasible)
    }
}

fn small_config(strategy: StrategyTag, seed: u64) -> SimConfig {
    SimConfig {
        network: NetworkSource::Grid {
            size: 5,
            spacing: 100.0,
            beta_min: 0.005,
            beta_max: 0.02,
            seed: 3,
        },
        drones: 3,
        max_parcels: Some(10),
        horizon: 900.0,
        strategy,
        seed,
        ..SimConfig::default()
    }
}

fn run(cfg: &SimConfig, backend: &dyn MilpBackend) -> SimOutput {
    let net = cfg.build_network().unwrap();
    run_simulation(cfg, &net, backend, RunOptions::default()).unwrap()
}

#[test]
fn tags_round_trip() {
    for tag in StrategyTag::ALL {
        assert_eq!(make_strategy(tag).tag(), tag);
    }
}

#[test]
fn shortest_never_calls_the_solver() {
    let out = run(&small_config(StrategyTag::Shortest, 1), &AlwaysInfeasible);
    assert_eq!(out.metrics.milp_calls, 0);
    assert_eq!(out.metrics.avg_delivery_delay_pct, 0.0);
    assert!(out.metrics.delivered > 0);
}

#[test]
fn solver_failure_falls_back_to_shortest_paths() {
    for tag in [
        StrategyTag::Distributed,
        StrategyTag::Centralized,
        StrategyTag::Decentralized,
    ] {
        let cfg = small_config(tag, 1);
        let out = run(&cfg, &AlwaysInfeasible);
        assert_eq!(out.metrics.failed, 0, "{tag}");
        assert!(out.metrics.delivered > 0, "{tag}");
        for d in &out.ledger.deliveries {
            assert!((d.in_flight() - d.shortest).abs() < 1e-6, "{tag}: {d:?}");
        }
        assert!(out.ledger.solver_calls.iter().all(|c| c.status == PlanStatus::Fallback));
        assert!(out.log.count(EventKind::Fallback) > 0, "{tag}");
    }
}

#[test]
fn distributed_solves_once_per_pickup() {
    let out = run(&small_config(StrategyTag::Distributed, 1), &HighsBackend);
    let pickups = out.log.count(EventKind::Pickup);
    assert!(out.metrics.milp_calls <= pickups);
    assert!(out
        .ledger
        .solver_calls
        .iter()
        .all(|c| c.trigger == Trigger::Pickup && c.drones.len() == 1));
}

#[test]
fn centralized_server_sees_the_truth() {
    let cfg = small_config(StrategyTag::Centralized, 2);
    let out = run(&cfg, &HighsBackend);
    assert!(out.ledger.belief_checks > 0);
    assert_eq!(out.ledger.belief_mismatches, 0);
    assert!(out
        .ledger
        .solver_calls
        .iter()
        .all(|c| c.drones.len() <= cfg.centralized_batch));
}

#[test]
fn decentralized_cluster_solves_are_joint() {
    let out = run(&small_config(StrategyTag::Decentralized, 5), &HighsBackend);
    let cluster_calls: Vec<_> = out
        .ledger
        .solver_calls
        .iter()
        .filter(|c| c.trigger == Trigger::Cluster)
        .collect();
    assert!(cluster_calls.len() <= out.log.count(EventKind::Cluster));
    // a cluster solve plans only drones that still have a detour to choose
    assert!(cluster_calls.iter().all(|c| !c.drones.is_empty()));
}
