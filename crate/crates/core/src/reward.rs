//! Time-dependent information reward of a road segment.
//!
//! Uncertainty on an edge grows linearly with the time since its last scan,
//! at rate `beta * length`, until it saturates at `r_max`.

use crate::network::Edge;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    pub beta: f64,
    pub length: f64,
    pub r_max: f64,
}

impl RewardParams {
    pub fn of(edge: &Edge) -> Self {
        Self {
            beta: edge.beta,
            length: edge.length,
            r_max: edge.r_max,
        }
    }

    /// Reward accrual rate in units per second.
    pub fn rate(&self) -> f64 {
        self.beta * self.length
    }
}

/// Reward collected by scanning at `t_scan` an edge last visited at `t_last`.
/// Clamped to `[0, r_max]`; a scan older than the last visit earns nothing.
pub fn realized_reward(params: &RewardParams, t_scan: f64, t_last: f64) -> f64 {
    (params.rate() * (t_scan - t_last)).min(params.r_max).max(0.0)
}

/// Reward a planner expects from scanning `t_scan_rel` seconds after `t_curr`,
/// given the believed last-visit time.
pub fn expected_reward(params: &RewardParams, t_curr: f64, t_scan_rel: f64, belief_ts: f64) -> f64 {
    realized_reward(params, t_curr + t_scan_rel, belief_ts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_evaluation() {
        let p = RewardParams {
            beta: 0.5,
            length: 100.0,
            r_max: 1000.0,
        };
        assert_eq!(realized_reward(&p, 10.0, 0.0), 500.0);
        assert_eq!(realized_reward(&p, 40.0, 0.0), 1000.0);
        assert_eq!(realized_reward(&p, 7.0, 7.0), 0.0);
        assert_eq!(realized_reward(&p, 5.0, 7.0), 0.0);
    }

    #[test]
    fn expected_uses_belief() {
        let p = RewardParams {
            beta: 0.1,
            length: 100.0,
            r_max: 10_000.0,
        };
        assert!((expected_reward(&p, 100.0, 20.0, 60.0) - 600.0).abs() < 1e-9);
        assert_eq!(expected_reward(&p, 100.0, 20.0, 120.0), 0.0);
    }
}
