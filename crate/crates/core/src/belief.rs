//! Last-visit bookkeeping: per-drone beliefs and the simulator's ground truth.
//!
//! Both are per-edge timestamps (seconds of global simulation time) that start
//! at the simulation epoch. Beliefs only ever move forward in time, and the
//! meet-and-merge rule is an element-wise maximum, which makes the set of
//! beliefs a join semilattice.

use std::fmt::Write as _;

use thiserror::Error;

use crate::network::{EdgeId, RoadNetwork};

#[derive(Debug, Error, PartialEq)]
pub enum BeliefError {
    #[error("belief matrices are keyed by different edge sets ({0} vs {1} edges)")]
    MismatchedEdges(usize, usize),
    #[error("unknown edge index {0}")]
    UnknownEdge(usize),
    #[error("cannot merge an empty list of beliefs")]
    Empty,
    #[error("average AoI needs at least one edge")]
    NoEdges,
    #[error("invalid AoI window: t_end={t_end}, horizon={horizon}")]
    InvalidWindow { t_end: f64, horizon: f64 },
}

/// A drone's estimate of when each edge was last scanned.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefMatrix {
    stamps: Vec<f64>,
}

impl BeliefMatrix {
    /// All edges believed last visited at the epoch (t = 0).
    pub fn new(edge_count: usize) -> Self {
        Self {
            stamps: vec![0.0; edge_count],
        }
    }

    pub fn from_stamps(stamps: Vec<f64>) -> Self {
        Self { stamps }
    }

    pub fn len(&self) -> usize {
        self.stamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stamps.is_empty()
    }

    pub fn get(&self, edge: EdgeId) -> f64 {
        self.stamps[edge.0]
    }

    pub fn stamps(&self) -> &[f64] {
        &self.stamps
    }

    /// Moves the stamp of `edge` forward to `t`; earlier stamps are ignored.
    pub fn observe(&mut self, edge: EdgeId, t: f64) -> Result<(), BeliefError> {
        let slot = self.stamps.get_mut(edge.0).ok_or(BeliefError::UnknownEdge(edge.0))?;
        if t > *slot {
            *slot = t;
        }
        Ok(())
    }

    /// In-place join with `other`.
    pub fn absorb(&mut self, other: &BeliefMatrix) -> Result<(), BeliefError> {
        if self.len() != other.len() {
            return Err(BeliefError::MismatchedEdges(self.len(), other.len()));
        }
        for (mine, theirs) in self.stamps.iter_mut().zip(&other.stamps) {
            if *theirs > *mine {
                *mine = *theirs;
            }
        }
        Ok(())
    }

    /// Element-wise `<=`.
    pub fn dominated_by(&self, other: &BeliefMatrix) -> bool {
        self.len() == other.len() && self.stamps.iter().zip(&other.stamps).all(|(a, b)| a <= b)
    }

    /// `from,to,timestamp` rows, one per edge.
    pub fn to_csv(&self, net: &RoadNetwork) -> String {
        let mut out = String::from("from,to,timestamp\n");
        for e in net.edge_ids() {
            let edge = net.edge(e);
            let _ = writeln!(
                out,
                "{},{},{}",
                net.node(edge.from).name,
                net.node(edge.to).name,
                self.stamps[e.0]
            );
        }
        out
    }
}

/// Element-wise maximum of all `beliefs`.
pub fn merge<'a, I>(beliefs: I) -> Result<BeliefMatrix, BeliefError>
where
    I: IntoIterator<Item = &'a BeliefMatrix>,
{
    let mut iter = beliefs.into_iter();
    let mut merged = iter.next().ok_or(BeliefError::Empty)?.clone();
    for b in iter {
        merged.absorb(b)?;
    }
    Ok(merged)
}

/// True most-recent scan time per edge, plus whether the edge was ever scanned.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthVisits {
    last: BeliefMatrix,
    visited: Vec<bool>,
}

impl GroundTruthVisits {
    pub fn new(edge_count: usize) -> Self {
        Self {
            last: BeliefMatrix::new(edge_count),
            visited: vec![false; edge_count],
        }
    }

    pub fn last_visit(&self, edge: EdgeId) -> f64 {
        self.last.get(edge)
    }

    pub fn as_belief(&self) -> &BeliefMatrix {
        &self.last
    }

    pub fn len(&self) -> usize {
        self.last.len()
    }

    pub fn is_empty(&self) -> bool {
        self.last.is_empty()
    }

    pub fn visited_count(&self) -> usize {
        self.visited.iter().filter(|v| **v).count()
    }

    pub fn was_visited(&self, edge: EdgeId) -> bool {
        self.visited[edge.0]
    }
}

/// Applies one scan to the scanning drone's belief and to the ground truth.
/// Both entries become `max(previous, t)`.
pub fn record_scan(
    belief: &mut BeliefMatrix,
    truth: &mut GroundTruthVisits,
    edge: EdgeId,
    t: f64,
) -> Result<(), BeliefError> {
    if belief.len() != truth.len() {
        return Err(BeliefError::MismatchedEdges(belief.len(), truth.len()));
    }
    truth.last.observe(edge, t)?;
    truth.visited[edge.0] = true;
    belief.observe(edge, t)
}

/// Mean over edges of `min(t_end - T_last, horizon) / horizon`.
pub fn average_aoi(truth: &GroundTruthVisits, t_end: f64, horizon: f64) -> Result<f64, BeliefError> {
    if truth.is_empty() {
        return Err(BeliefError::NoEdges);
    }
    if !(t_end >= 0.0) || !(horizon > 0.0) {
        return Err(BeliefError::InvalidWindow { t_end, horizon });
    }
    let total: f64 = truth
        .last
        .stamps
        .iter()
        .map(|&t| (t_end - t).clamp(0.0, horizon) / horizon)
        .sum();
    Ok(total / truth.len() as f64)
}
