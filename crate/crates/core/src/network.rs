//! Road-network graph model.
//!
//! Intersections are nodes with planar coordinates in meters; road segments are
//! directed edges carrying a length, an uncertainty growth density `beta` and a
//! reward saturation cap. Drones fly above the road graph, so networks are
//! usually built in bidirectional mode.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense index of a node inside one [`RoadNetwork`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

/// Dense index of a directed edge inside one [`RoadNetwork`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl EdgeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    /// Meters.
    pub length: f64,
    /// Reward units per meter per second.
    pub beta: f64,
    pub r_max: f64,
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("duplicate edge {from} -> {to}")]
    DuplicateEdge { from: String, to: String },
    #[error("dangling endpoint `{node}` in edge {from} -> {to}")]
    DanglingEndpoint { node: String, from: String, to: String },
    #[error("edge {from} -> {to}: length must be positive, got {length}")]
    NonPositiveLength { from: String, to: String, length: f64 },
    #[error("edge {from} -> {to}: {message}")]
    InvalidEdge { from: String, to: String, message: String },
    #[error("node `{0}` has non-finite coordinates")]
    NonFiniteCoordinate(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Directed road graph with in/out adjacency indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    out_edges: Vec<Vec<EdgeId>>,
    in_edges: Vec<Vec<EdgeId>>,
    edge_index: HashMap<(NodeId, NodeId), EdgeId>,
    name_index: HashMap<String, NodeId>,
    bidirectional: bool,
}

/// Incremental constructor that checks the network invariants as records arrive.
#[derive(Debug, Default)]
pub struct NetworkBuilder {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    edge_index: HashMap<(NodeId, NodeId), EdgeId>,
    name_index: HashMap<String, NodeId>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, name: &str, x: f64, y: f64) -> Result<NodeId, NetworkError> {
        if self.name_index.contains_key(name) {
            return Err(NetworkError::DuplicateNode(name.to_string()));
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(NetworkError::NonFiniteCoordinate(name.to_string()));
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            name: name.to_string(),
            x,
            y,
        });
        self.name_index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn add_edge(
        &mut self,
        from: &str,
        to: &str,
        length: f64,
        beta: f64,
        r_max: f64,
    ) -> Result<EdgeId, NetworkError> {
        let lookup = |name: &str| {
            self.name_index
                .get(name)
                .copied()
                .ok_or_else(|| NetworkError::DanglingEndpoint {
                    node: name.to_string(),
                    from: from.to_string(),
                    to: to.to_string(),
                })
        };
        let (u, v) = (lookup(from)?, lookup(to)?);
        if !(length > 0.0) || !length.is_finite() {
            return Err(NetworkError::NonPositiveLength {
                from: from.to_string(),
                to: to.to_string(),
                length,
            });
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(NetworkError::InvalidEdge {
                from: from.to_string(),
                to: to.to_string(),
                message: format!("beta must be >= 0, got {beta}"),
            });
        }
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(NetworkError::InvalidEdge {
                from: from.to_string(),
                to: to.to_string(),
                message: format!("rmax must be > 0, got {r_max}"),
            });
        }
        if u == v {
            return Err(NetworkError::InvalidEdge {
                from: from.to_string(),
                to: to.to_string(),
                message: "self-loops are not road segments".into(),
            });
        }
        self.push_edge(u, v, length, beta, r_max)
    }

    fn push_edge(&mut self, u: NodeId, v: NodeId, length: f64, beta: f64, r_max: f64) -> Result<EdgeId, NetworkError> {
        if self.edge_index.contains_key(&(u, v)) {
            return Err(NetworkError::DuplicateEdge {
                from: self.nodes[u.0].name.clone(),
                to: self.nodes[v.0].name.clone(),
            });
        }
        let id = EdgeId(self.edges.len());
        self.edges.push(Edge {
            from: u,
            to: v,
            length,
            beta,
            r_max,
        });
        self.edge_index.insert((u, v), id);
        Ok(id)
    }

    /// Finalizes the graph. In bidirectional mode every edge without a reverse
    /// twin gets one with the same length, beta and cap.
    pub fn build(mut self, bidirectional: bool) -> Result<RoadNetwork, NetworkError> {
        if bidirectional {
            let declared = self.edges.len();
            for i in 0..declared {
                let e = self.edges[i].clone();
                if !self.edge_index.contains_key(&(e.to, e.from)) {
                    self.push_edge(e.to, e.from, e.length, e.beta, e.r_max)?;
                } else {
                    let twin = self.edge_index[&(e.to, e.from)];
                    if (self.edges[twin.0].length - e.length).abs() > 1e-9 * e.length.max(1.0) {
                        return Err(NetworkError::InvalidEdge {
                            from: self.nodes[e.from.0].name.clone(),
                            to: self.nodes[e.to.0].name.clone(),
                            message: "bidirectional twins must share the same length".into(),
                        });
                    }
                }
            }
        }
        let n = self.nodes.len();
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (i, e) in self.edges.iter().enumerate() {
            out_edges[e.from.0].push(EdgeId(i));
            in_edges[e.to.0].push(EdgeId(i));
        }
        Ok(RoadNetwork {
            nodes: self.nodes,
            edges: self.edges,
            out_edges,
            in_edges,
            edge_index: self.edge_index,
            name_index: self.name_index,
            bidirectional,
        })
    }
}

impl RoadNetwork {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.0]
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.edges.len()).map(EdgeId)
    }

    pub fn out_edges(&self, node: NodeId) -> &[EdgeId] {
        &self.out_edges[node.0]
    }

    pub fn in_edges(&self, node: NodeId) -> &[EdgeId] {
        &self.in_edges[node.0]
    }

    pub fn find_edge(&self, from: NodeId, to: NodeId) -> Option<EdgeId> {
        self.edge_index.get(&(from, to)).copied()
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.name_index.get(name).copied()
    }

    pub fn is_bidirectional(&self) -> bool {
        self.bidirectional
    }

    /// Euclidean distance between two nodes in meters.
    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        let (p, q) = (&self.nodes[a.0], &self.nodes[b.0]);
        (p.x - q.x).hypot(p.y - q.y)
    }

    /// `from->to` label used in logs and CSV snapshots.
    pub fn edge_label(&self, id: EdgeId) -> String {
        let e = &self.edges[id.0];
        format!("{}->{}", self.nodes[e.from.0].name, self.nodes[e.to.0].name)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| NetworkError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses the sectioned text format (`[meta]`, `[nodes]`, `[edges]`).
    pub fn parse(text: &str) -> Result<Self, NetworkError> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Meta,
            Nodes,
            Edges,
        }
        let mut section = Section::None;
        let mut builder = NetworkBuilder::new();
        let mut bidirectional = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let malformed = |message: String| NetworkError::Malformed { line: line_no, message };
            if line.starts_with('[') {
                section = match line {
                    "[meta]" => Section::Meta,
                    "[nodes]" => Section::Nodes,
                    "[edges]" => Section::Edges,
                    other => return Err(malformed(format!("unknown section {other}"))),
                };
                continue;
            }
            match section {
                Section::None => {
                    return Err(malformed("record outside of any section".into()));
                }
                Section::Meta => {
                    let (key, value) = line
                        .split_once('=')
                        .ok_or_else(|| malformed(format!("expected key=value, got `{line}`")))?;
                    match (key.trim(), value.trim()) {
                        ("bidirectional", "true") => bidirectional = true,
                        ("bidirectional", "false") => bidirectional = false,
                        ("bidirectional", v) => {
                            return Err(malformed(format!("bidirectional must be true|false, got `{v}`")))
                        }
                        (k, _) => return Err(malformed(format!("unknown meta key `{k}`"))),
                    }
                }
                Section::Nodes => {
                    let fields: Vec<&str> = line.split_whitespace().collect();
                    if fields.len() != 3 {
                        return Err(malformed(format!(
                            "node record needs `id x y`, got {} fields",
                            fields.len()
                        )));
                    }
                    let x = parse_f64(fields[1], "x", line_no)?;
                    let y = parse_f64(fields[2], "y", line_no)?;
                    builder.add_node(fields[0], x, y)?;
                }
                Section::Edges => {
                    let fields: Vec<&str> = line.split_whitespace().collect();
                    if fields.len() != 5 {
                        return Err(malformed(format!(
                            "edge record needs `from to length beta rmax`, got {} fields",
                            fields.len()
                        )));
                    }
                    let length = parse_f64(fields[2], "length", line_no)?;
                    let beta = parse_f64(fields[3], "beta", line_no)?;
                    let r_max = parse_f64(fields[4], "rmax", line_no)?;
                    builder.add_edge(fields[0], fields[1], length, beta, r_max)?;
                }
            }
        }
        builder.build(bidirectional)
    }

    /// Serializes to the sectioned text format. Every directed edge is written,
    /// so the output re-parses to an identical network.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("[meta]\n");
        out.push_str(&format!("bidirectional={}\n\n[nodes]\n", self.bidirectional));
        for n in &self.nodes {
            out.push_str(&format!("{} {} {}\n", n.name, n.x, n.y));
        }
        out.push_str("\n[edges]\n");
        for e in &self.edges {
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                self.nodes[e.from.0].name, self.nodes[e.to.0].name, e.length, e.beta, e.r_max
            ));
        }
        out
    }
}

fn parse_f64(field: &str, what: &str, line: usize) -> Result<f64, NetworkError> {
    field.parse::<f64>().map_err(|_| NetworkError::Malformed {
        line,
        message: format!("field `{what}`: cannot parse `{field}` as a number"),
    })
}

/// How `beta` is assigned to generated edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BetaPolicy {
    Constant(f64),
    /// Seeded uniform draw per directed edge.
    Uniform {
        min: f64,
        max: f64,
    },
}

/// How `r_max` is assigned to generated edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RMaxPolicy {
    Constant(f64),
    /// `r_max = beta * length * horizon`, i.e. the edge saturates after
    /// `horizon` seconds without a visit.
    Saturation {
        horizon: f64,
    },
}

impl RMaxPolicy {
    pub fn cap(&self, beta: f64, length: f64) -> f64 {
        match *self {
            RMaxPolicy::Constant(c) => c,
            // a zero-beta edge never accrues reward; keep the cap strictly positive
            RMaxPolicy::Saturation { horizon } => (beta * length * horizon).max(1e-9),
        }
    }
}

/// Generates an `n x n` bidirectional grid with `spacing` meters between
/// neighbouring intersections. Node `n{r*n+c}` sits at `(c*spacing, r*spacing)`.
pub fn generate_grid(
    n: usize,
    spacing: f64,
    beta: BetaPolicy,
    r_max: RMaxPolicy,
    seed: u64,
) -> Result<RoadNetwork, NetworkError> {
    if n < 2 {
        return Err(NetworkError::InvalidGrid(format!("side count must be >= 2, got {n}")));
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(NetworkError::InvalidGrid(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    match beta {
        BetaPolicy::Constant(b) if !(b >= 0.0) => {
            return Err(NetworkError::InvalidGrid(format!("beta must be >= 0, got {b}")))
        }
        BetaPolicy::Uniform { min, max } if !(min >= 0.0 && max >= min) => {
            return Err(NetworkError::InvalidGrid(format!("invalid beta range [{min}, {max}]")))
        }
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || match beta {
        BetaPolicy::Constant(b) => b,
        BetaPolicy::Uniform { min, max } if max > min => rng.random_range(min..max),
        BetaPolicy::Uniform { min, .. } => min,
    };
    let mut builder = NetworkBuilder::new();
    for r in 0..n {
        for c in 0..n {
            builder.add_node(&format!("n{}", r * n + c), c as f64 * spacing, r as f64 * spacing)?;
        }
    }
    for r in 0..n {
        for c in 0..n {
            let here = NodeId(r * n + c);
            let mut neighbours = Vec::with_capacity(2);
            if c + 1 < n {
                neighbours.push(NodeId(r * n + c + 1));
            }
            if r + 1 < n {
                neighbours.push(NodeId((r + 1) * n + c));
            }
            for there in neighbours {
                for (u, v) in [(here, there), (there, here)] {
                    let b = draw();
                    builder.push_edge(u, v, spacing, b, r_max.cap(b, spacing))?;
                }
            }
        }
    }
    builder.build(true)
}

/// All-pairs shortest flight times at a fixed speed, with next-hop pointers for
/// path reconstruction. Unreachable pairs hold `f64::INFINITY`.
#[derive(Debug, Clone)]
pub struct TravelTimeTable {
    speed: f64,
    n: usize,
    times: Vec<f64>,
    next: Vec<usize>,
}

const NO_HOP: usize = usize::MAX;

impl TravelTimeTable {
    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Shortest travel time in seconds.
    pub fn time(&self, from: NodeId, to: NodeId) -> f64 {
        self.times[from.0 * self.n + to.0]
    }

    /// Node sequence of one shortest path, `None` if unreachable.
    pub fn path(&self, from: NodeId, to: NodeId) -> Option<Vec<NodeId>> {
        if from == to {
            return Some(vec![from]);
        }
        if self.next[from.0 * self.n + to.0] == NO_HOP {
            return None;
        }
        let mut path = vec![from];
        let mut cur = from.0;
        while cur != to.0 {
            cur = self.next[cur * self.n + to.0];
            path.push(NodeId(cur));
        }
        Some(path)
    }
}

impl fmt::Display for TravelTimeTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TravelTimeTable({} nodes @ {} m/s)", self.n, self.speed)
    }
}

/// Floyd-Warshall over edge flight times `length / speed`.
pub fn all_pairs_shortest_times(net: &RoadNetwork, speed: f64) -> TravelTimeTable {
    assert!(speed > 0.0, "speed must be positive");
    let n = net.node_count();
    let mut times = vec![f64::INFINITY; n * n];
    let mut next = vec![NO_HOP; n * n];
    for i in 0..n {
        times[i * n + i] = 0.0;
        next[i * n + i] = i;
    }
    for e in net.edges() {
        let (u, v) = (e.from.0, e.to.0);
        let t = e.length / speed;
        if t < times[u * n + v] {
            times[u * n + v] = t;
            next[u * n + v] = v;
        }
    }
    for k in 0..n {
        for i in 0..n {
            let ik = times[i * n + k];
            if ik == f64::INFINITY {
                continue;
            }
            for j in 0..n {
                let candidate = ik + times[k * n + j];
                if candidate < times[i * n + j] {
                    times[i * n + j] = candidate;
                    next[i * n + j] = next[i * n + k];
                }
            }
        }
    }
    TravelTimeTable { speed, n, times, next }
}

/// Per-drone input to ellipsoid pruning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneTarget {
    pub origin: NodeId,
    pub destination: NodeId,
    /// Seconds; may be `f64::INFINITY`.
    pub budget: f64,
}

/// Node subset kept by [`ellipsoid_prune`] together with the induced edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Subnetwork {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
    node_mask: Vec<bool>,
    /// Indices (into the pruning targets) of drones whose own trip exceeds
    /// their budget.
    pub infeasible: Vec<usize>,
}

impl Subnetwork {
    /// The whole network, unpruned.
    pub fn full(net: &RoadNetwork) -> Self {
        Self {
            nodes: net.node_ids().collect(),
            edges: net.edge_ids().collect(),
            node_mask: vec![true; net.node_count()],
            infeasible: Vec::new(),
        }
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        self.node_mask.get(node.0).copied().unwrap_or(false)
    }
}

/// Slack used when comparing sums of travel times against a budget.
pub(crate) fn budget_slack(budget: f64) -> f64 {
    1e-9 * (1.0 + budget.abs().min(1e12))
}

/// Keeps every node that lies on some budget-feasible detour of at least one
/// drone: `tau(O', v) + tau(v, D) <= B`.
pub fn ellipsoid_prune(net: &RoadNetwork, table: &TravelTimeTable, drones: &[PruneTarget]) -> Subnetwork {
    let n = net.node_count();
    let mut mask = vec![false; n];
    let mut infeasible = Vec::new();
    for (k, d) in drones.iter().enumerate() {
        let direct = table.time(d.origin, d.destination);
        if !(direct <= d.budget + budget_slack(d.budget)) {
            infeasible.push(k);
            continue;
        }
        for v in 0..n {
            let through = table.time(d.origin, NodeId(v)) + table.time(NodeId(v), d.destination);
            if through <= d.budget + budget_slack(d.budget) {
                mask[v] = true;
            }
        }
    }
    let nodes: Vec<NodeId> = (0..n).filter(|&v| mask[v]).map(NodeId).collect();
    let edges: Vec<EdgeId> = net
        .edge_ids()
        .filter(|&e| {
            let edge = net.edge(e);
            mask[edge.from.0] && mask[edge.to.0]
        })
        .collect();
    Subnetwork {
        nodes,
        edges,
        node_mask: mask,
        infeasible,
    }
}
