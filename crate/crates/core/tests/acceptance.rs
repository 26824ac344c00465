//! End-to-end acceptance checks. Each criterion prints one `PASS` or `FAIL`
//! line; run with `--nocapture` to see them.
//!
//! The desk scenario (10x10 grid, 6 drones, 40 parcels, 1800 s) is simulated
//! once per strategy and seed and shared by the criteria that need it.

mod common;

use std::fmt::Display;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use dualtask::belief::{merge, BeliefMatrix};
use dualtask::config::{NetworkSource, SimConfig, StrategyTag};
use dualtask::experiment::run_single;
use dualtask::network::{all_pairs_shortest_times, EdgeId};
use dualtask::planner::{
    brute_force_plan, solve_cluster, ClusterPlanRequest, HighsBackend, LinearModel, MilpBackend, RawSolution,
    SolveError, SolveLimits,
};
use dualtask::reward::{realized_reward, RewardParams};
use dualtask::sim::{run_simulation, RunOptions, Scenario, SimOutput};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

const DESK_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

static REPORT: Mutex<Vec<String>> = Mutex::new(Vec::new());

fn report(id: u32, ok: bool, detail: impl Display) -> bool {
    let line = format!("{} criterion {id:2}: {detail}", if ok { "PASS" } else { "FAIL" });
    println!("{line}");
    REPORT.lock().unwrap().push(line);
    ok
}

struct AlwaysInfeasible;

impl MilpBackend for AlwaysInfeasible {
    fn name(&self) -> &'static str {
        "infeasible"
    }

    fn solve(&self, _model: &LinearModel, _limits: &SolveLimits) -> Result<RawSolution, SolveError> {
        Err(SolveError::Infeasible)
    }
}

struct DeskRuns {
    cfg: SimConfig,
    /// Indexed like `StrategyTag::ALL`, then by seed.
    runs: Vec<Vec<SimOutput>>,
}

impl DeskRuns {
    fn of(&self, tag: StrategyTag) -> &[SimOutput] {
        let i = StrategyTag::ALL.iter().position(|&t| t == tag).unwrap();
        &self.runs[i]
    }

    fn mean(&self, tag: StrategyTag, f: impl Fn(&SimOutput) -> f64) -> f64 {
        let runs = self.of(tag);
        runs.iter().map(f).sum::<f64>() / runs.len() as f64
    }
}

fn desk_runs() -> DeskRuns {
    let cfg = SimConfig::default();
    let net = cfg.build_network().unwrap();
    let runs = StrategyTag::ALL
        .iter()
        .map(|&tag| {
            DESK_SEEDS
                .iter()
                .map(|&seed| {
                    let started = Instant::now();
                    let run_cfg = SimConfig {
                        strategy: tag,
                        seed,
                        ..cfg.clone()
                    };
                    let out = run_simulation(&run_cfg, &net, &HighsBackend, RunOptions::default()).unwrap();
                    println!(
                        "  desk {tag:>13} seed {seed}: gain {:.1} coverage {:.1}% calls {} ({:.0} s)",
                        out.metrics.total_info_gain,
                        out.metrics.spatial_coverage_pct,
                        out.metrics.milp_calls,
                        started.elapsed().as_secs_f64()
                    );
                    out
                })
                .collect()
        })
        .collect();
    DeskRuns { cfg, runs }
}

fn milp_matches_brute_force() -> bool {
    let started = Instant::now();
    let limits = SolveLimits {
        time: 60.0,
        nodes: None,
    };
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    let instances = 200;
    for seed in 0..instances {
        let inst = common::random_instance(seed, 12, 2);
        let req = ClusterPlanRequest::new(
            &inst.network,
            &inst.table,
            &inst.belief,
            inst.t_curr,
            inst.drones.clone(),
        );
        let milp = solve_cluster(&req, &HighsBackend, &limits).unwrap();
        let oracle = brute_force_plan(&req, inst.network.node_count()).unwrap();
        let err = (milp.objective - oracle.objective).abs() / (1.0 + oracle.objective.abs());
        worst = worst.max(err);
        if err > 1e-6 {
            bad.push(seed);
        }
    }
    let elapsed = started.elapsed();
    report(
        1,
        bad.is_empty() && elapsed < Duration::from_secs(300),
        format!(
            "{instances} instances, worst relative gap {worst:.2e}, mismatches {bad:?}, {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn detours_within_bound(desk: &DeskRuns) -> bool {
    let alpha = desk.cfg.alpha;
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for tag in [
        StrategyTag::Distributed,
        StrategyTag::Centralized,
        StrategyTag::Decentralized,
    ] {
        for out in desk.of(tag) {
            for d in &out.ledger.deliveries {
                worst = worst.max(d.in_flight() - (1.0 + alpha) * d.shortest);
                count += 1;
            }
        }
    }
    report(
        2,
        count > 0 && worst <= 1e-3,
        format!("{count} detoured deliveries, max excess over (1+alpha) shortest {worst:.2e} s"),
    )
}

fn strategy_ordering(desk: &DeskRuns) -> bool {
    use StrategyTag::*;
    let gain = |t| desk.mean(t, |o| o.metrics.total_info_gain);
    let cov = |t| desk.mean(t, |o| o.metrics.spatial_coverage_pct);
    let ordered = |f: &dyn Fn(StrategyTag) -> f64| {
        f(Shortest) < f(Distributed) && f(Distributed) < f(Decentralized) && f(Decentralized) <= f(Centralized) * 1.02
    };
    let calls_ok = desk
        .of(Decentralized)
        .iter()
        .zip(desk.of(Centralized))
        .all(|(d, c)| d.metrics.milp_calls < c.metrics.milp_calls);
    let calls: Vec<String> = desk
        .of(Decentralized)
        .iter()
        .zip(desk.of(Centralized))
        .map(|(d, c)| format!("{}<{}", d.metrics.milp_calls, c.metrics.milp_calls))
        .collect();
    report(
        3,
        ordered(&gain) && ordered(&cov) && calls_ok,
        format!(
            "mean gain {:.0} < {:.0} < {:.0} <= 1.02 x {:.0}; coverage {:.1} < {:.1} < {:.1} <= 1.02 x {:.1}; calls {}",
            gain(Shortest),
            gain(Distributed),
            gain(Decentralized),
            gain(Centralized),
            cov(Shortest),
            cov(Distributed),
            cov(Decentralized),
            cov(Centralized),
            calls.join(" ")
        ),
    )
}

fn centralized_belief_is_truth(desk: &DeskRuns) -> bool {
    let runs = desk.of(StrategyTag::Centralized);
    let checks: usize = runs.iter().map(|o| o.ledger.belief_checks).sum();
    let mismatches: usize = runs.iter().map(|o| o.ledger.belief_mismatches).sum();
    report(
        4,
        checks > 0 && mismatches == 0,
        format!("{mismatches} mismatches in {checks} solver-time comparisons"),
    )
}

fn belief_lattice() -> bool {
    let belief = || prop::collection::vec(0.0..5000.0f64, 10).prop_map(BeliefMatrix::from_stamps);
    let join = |a: &BeliefMatrix, b: &BeliefMatrix| merge([a, b]).unwrap();
    let mut runner = TestRunner::new(Config::with_cases(1000));
    let result = runner.run(&(belief(), belief(), belief()), |(a, b, c)| {
        let ab = join(&a, &b);
        prop_assert_eq!(&join(&a, &a), &a);
        prop_assert_eq!(&ab, &join(&b, &a));
        prop_assert_eq!(join(&ab, &c), join(&a, &join(&b, &c)));
        prop_assert!(a.dominated_by(&ab) && b.dominated_by(&ab));
        for e in 0..a.len() {
            let v = ab.get(EdgeId(e));
            prop_assert!(v == a.get(EdgeId(e)) || v == b.get(EdgeId(e)));
        }
        Ok(())
    });
    report(
        5,
        result.is_ok(),
        format!("idempotent, commutative, associative, dominating over 1000 cases {result:?}"),
    )
}

fn reward_properties() -> bool {
    let params = (0.0..1.0f64, 1.0..500.0f64, 0.0..5000.0f64).prop_map(|(beta, length, r_max)| RewardParams {
        beta,
        length,
        r_max,
    });
    let mut runner = TestRunner::new(Config::with_cases(1000));
    let result = runner.run(
        &(params, 0.0..1000.0f64, 0.0..3000.0f64, 0.0..3000.0f64),
        |(p, t0, a, b)| {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (r_lo, r_hi) = (realized_reward(&p, t0 + lo, t0), realized_reward(&p, t0 + hi, t0));
            prop_assert!((0.0..=p.r_max).contains(&r_lo) && (0.0..=p.r_max).contains(&r_hi));
            prop_assert!(r_lo <= r_hi);
            if p.rate() * lo < p.r_max {
                prop_assert!((r_lo - p.rate() * lo).abs() <= 1e-9 * (1.0 + p.r_max));
            }
            prop_assert_eq!(realized_reward(&p, t0 - lo, t0), 0.0);
            Ok(())
        },
    );
    let p = RewardParams {
        beta: 0.5,
        length: 100.0,
        r_max: 1000.0,
    };
    let examples = [
        (realized_reward(&p, 10.0, 0.0), 500.0),
        (realized_reward(&p, 40.0, 0.0), 1000.0),
        (realized_reward(&p, 25.0, 25.0), 0.0),
    ];
    let exact = examples.iter().all(|(got, want)| got == want);
    report(
        6,
        result.is_ok() && exact,
        format!("clamp, monotone, linear over 1000 cases {result:?}; examples {examples:?}"),
    )
}

fn time_series_dominance(desk: &DeskRuns) -> bool {
    use StrategyTag::*;
    let monotone = desk
        .runs
        .iter()
        .flatten()
        .all(|o| o.time_series.windows(2).all(|w| w[0].1 <= w[1].1 && w[0].0 < w[1].0));
    let last = |t| desk.mean(t, |o| o.time_series.last().unwrap().1);
    let dominate = [Decentralized, Centralized]
        .iter()
        .all(|&hi| [Distributed, Shortest].iter().all(|&lo| last(hi) > last(lo)));
    report(
        7,
        monotone && dominate,
        format!(
            "nondecreasing {monotone}; mean final samples shortest {:.0}, distributed {:.0}, decentralized {:.0}, centralized {:.0}",
            last(Shortest),
            last(Distributed),
            last(Decentralized),
            last(Centralized)
        ),
    )
}

fn infeasible_solver_falls_back() -> bool {
    let cfg = SimConfig::default();
    let net = cfg.build_network().unwrap();
    let mut delivered = 0;
    let mut failed = 0;
    let mut max_delay: f64 = 0.0;
    for tag in [
        StrategyTag::Distributed,
        StrategyTag::Centralized,
        StrategyTag::Decentralized,
    ] {
        let run_cfg = SimConfig {
            strategy: tag,
            ..cfg.clone()
        };
        let out = run_simulation(&run_cfg, &net, &AlwaysInfeasible, RunOptions::default()).unwrap();
        delivered += out.metrics.delivered;
        failed += out.metrics.failed + out.ledger.failed_parcels.len();
        for d in &out.ledger.deliveries {
            max_delay = max_delay.max((d.in_flight() - d.shortest).abs());
        }
    }
    report(
        8,
        delivered > 0 && failed == 0 && max_delay < 1e-6,
        format!("{delivered} deliveries on shortest paths (max deviation {max_delay:.1e} s), {failed} failed"),
    )
}

fn runs_are_reproducible() -> bool {
    // small enough that no solve reaches the wall-clock limit
    let small = SimConfig {
        network: NetworkSource::Grid {
            size: 6,
            spacing: 100.0,
            beta_min: 0.005,
            beta_max: 0.02,
            seed: 7,
        },
        drones: 4,
        max_parcels: Some(15),
        horizon: 1200.0,
        ..SimConfig::default()
    };
    let net = small.build_network().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut identical = true;
    let mut compared = 0;
    for tag in StrategyTag::ALL {
        let cfg = SimConfig {
            strategy: tag,
            seed: 11,
            ..small.clone()
        };
        let a = dir.path().join(format!("{tag}_a"));
        let b = dir.path().join(format!("{tag}_b"));
        run_single(&cfg, &net, &HighsBackend, &a, false).unwrap();
        run_single(&cfg, &net, &HighsBackend, &b, false).unwrap();
        for file in ["events.jsonl", "metrics.csv", "timeseries.csv"] {
            let x = std::fs::read(a.join(file)).unwrap();
            let y = std::fs::read(b.join(file)).unwrap();
            identical &= !x.is_empty() && x == y;
            compared += 1;
        }
    }
    report(
        9,
        identical,
        format!("{compared} output files compared byte for byte across repeated runs"),
    )
}

fn poisson_count() -> bool {
    let cfg = SimConfig {
        horizon: 100.0,
        max_parcels: None,
        order_rate: 0.8,
        ..SimConfig::default()
    };
    let net = cfg.build_network().unwrap();
    let table = all_pairs_shortest_times(&net, cfg.speed);
    let seeds = 200;
    let total: usize = (0..seeds)
        .map(|seed| {
            let s = Scenario::generate(&SimConfig { seed, ..cfg.clone() }, &net, &table);
            s.orders.len() + s.dropped_orders.len()
        })
        .sum();
    let mean = total as f64 / seeds as f64;
    let bound = 3.0 * 80f64.sqrt();
    report(
        10,
        (mean - 80.0).abs() <= bound,
        format!("mean arrivals {mean:.2} over {seeds} seeds, allowed 80 +/- {bound:.2}"),
    )
}

#[test]
fn acceptance_criteria() {
    let mut ok = true;
    ok &= milp_matches_brute_force();
    let desk = desk_runs();
    ok &= detours_within_bound(&desk);
    ok &= strategy_ordering(&desk);
    ok &= centralized_belief_is_truth(&desk);
    ok &= belief_lattice();
    ok &= reward_properties();
    ok &= time_series_dominance(&desk);
    ok &= infeasible_solver_falls_back();
    ok &= runs_are_reproducible();
    ok &= poisson_count();
    let lines = REPORT.lock().unwrap();
    assert!(
        ok,
        "failing criteria:\n{}",
        lines
            .iter()
            .filter(|l| l.starts_with("FAIL"))
            .cloned()
            .collect::<Vec<_>>()
            .join("\n")
    );
}
