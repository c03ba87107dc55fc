//! Simple temporal network in distance-graph form.
//!
//! An edge `from -> to` with weight `w` encodes `time(to) - time(from) <= w`.
//! Shortest paths from the datum give upper bounds, shortest paths into the
//! datum give (negated) lower bounds, and a negative cycle means the
//! constraints are inconsistent.

use std::collections::{HashMap, VecDeque};
use std::fmt::{self, Write as _};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Constraint, PlanRequest, RequestError};

/// Duration window used for events that carry no duration information.
pub const DEFAULT_DURATION: i64 = 60;

/// Stand-in for an unbounded distance.
const INF: i64 = i64::MAX / 4;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeId {
    Datum,
    Start(String),
    End(String),
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Datum => f.write_str("datum"),
            NodeId::Start(name) => write!(f, "{name}_S"),
            NodeId::End(name) => write!(f, "{name}_E"),
        }
    }
}

/// Position of a node inside one [`DistanceGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeIx(pub usize);

/// What produced an edge. Event and constraint positions index into the
/// request the graph was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EdgeOrigin {
    Horizon { event: usize },
    DurationWindow { event: usize },
    Constraint { event: usize, index: usize },
    Inferred { event: usize, index: usize },
    Allocation { event: usize },
    External { id: usize },
}

impl EdgeOrigin {
    pub fn event(&self) -> Option<usize> {
        match *self {
            EdgeOrigin::Horizon { event }
            | EdgeOrigin::DurationWindow { event }
            | EdgeOrigin::Constraint { event, .. }
            | EdgeOrigin::Inferred { event, .. }
            | EdgeOrigin::Allocation { event } => Some(event),
            EdgeOrigin::External { .. } => None,
        }
    }

    pub fn is_builtin(&self) -> bool {
        matches!(
            self,
            EdgeOrigin::Horizon { .. } | EdgeOrigin::DurationWindow { .. }
        )
    }

    /// The constraint behind a user or inferred edge.
    pub fn constraint<'a>(&self, req: &'a PlanRequest) -> Option<&'a Constraint> {
        match *self {
            EdgeOrigin::Constraint { event, index } => req.events.get(event)?.constraints.get(index),
            EdgeOrigin::Inferred { event, index } => req.events.get(event)?.inferred.get(index),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeIx,
    pub to: NodeIx,
    pub weight: i64,
    pub origin: EdgeOrigin,
    pub relaxation_count: u32,
}

impl Edge {
    pub fn new(from: NodeIx, to: NodeIx, weight: i64, origin: EdgeOrigin) -> Self {
        Edge {
            from,
            to,
            weight,
            origin,
            relaxation_count: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("edge endpoint {0:?} is not a node of this graph")]
    UnknownNode(NodeIx),
    #[error("an edge {from:?} -> {to:?} with origin {origin:?} already exists")]
    DuplicateEdge {
        from: NodeIx,
        to: NodeIx,
        origin: EdgeOrigin,
    },
}

/// The distance graph of a simple temporal network.
#[derive(Debug, Clone, Default)]
pub struct DistanceGraph {
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, NodeIx>,
    events: Vec<EventNodes>,
    edges: Vec<Edge>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
}

/// Start and end node of one event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventNodes {
    pub name: String,
    pub start: NodeIx,
    pub end: NodeIx,
}

impl DistanceGraph {
    /// A graph holding only the datum.
    pub fn new() -> Self {
        let mut g = DistanceGraph {
            nodes: Vec::new(),
            index: HashMap::new(),
            events: Vec::new(),
            edges: Vec::new(),
            outgoing: Vec::new(),
            incoming: Vec::new(),
        };
        g.add_node(NodeId::Datum);
        g
    }

    pub fn datum(&self) -> NodeIx {
        NodeIx(0)
    }

    /// Adds a node, returning the existing index if it is already present.
    pub fn add_node(&mut self, id: NodeId) -> NodeIx {
        if let Some(&ix) = self.index.get(&id) {
            return ix;
        }
        let ix = NodeIx(self.nodes.len());
        self.index.insert(id.clone(), ix);
        self.nodes.push(id);
        self.outgoing.push(Vec::new());
        self.incoming.push(Vec::new());
        ix
    }

    /// Adds the start and end node of an event and returns its event index.
    pub fn add_event(&mut self, name: &str) -> usize {
        let start = self.add_node(NodeId::Start(name.to_string()));
        let end = self.add_node(NodeId::End(name.to_string()));
        self.events.push(EventNodes {
            name: name.to_string(),
            start,
            end,
        });
        self.events.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, ix: NodeIx) -> &NodeId {
        &self.nodes[ix.0]
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn lookup(&self, id: &NodeId) -> Option<NodeIx> {
        self.index.get(id).copied()
    }

    pub fn events(&self) -> &[EventNodes] {
        &self.events
    }

    pub fn event(&self, event: usize) -> &EventNodes {
        &self.events[event]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Appends an edge without any consistency check.
    pub fn add_edge(&mut self, edge: Edge) -> Result<usize, GraphError> {
        for ix in [edge.from, edge.to] {
            if ix.0 >= self.nodes.len() {
                return Err(GraphError::UnknownNode(ix));
            }
        }
        let duplicate = self.outgoing[edge.from.0].iter().any(|&e| {
            let other = &self.edges[e];
            other.to == edge.to && other.origin == edge.origin
        });
        if duplicate {
            return Err(GraphError::DuplicateEdge {
                from: edge.from,
                to: edge.to,
                origin: edge.origin,
            });
        }
        let id = self.edges.len();
        self.outgoing[edge.from.0].push(id);
        self.incoming[edge.to.0].push(id);
        self.edges.push(edge);
        Ok(id)
    }

    /// Removes every edge added after the first `len`.
    pub fn truncate_edges(&mut self, len: usize) {
        while self.edges.len() > len {
            let edge = self.edges.pop().expect("non-empty");
            self.outgoing[edge.from.0].pop();
            self.incoming[edge.to.0].pop();
        }
    }

    /// Edges violated by an assignment of times to nodes. Nodes mapped to
    /// `None` are unassigned and their edges are skipped.
    pub fn violated_edges(&self, times: &[Option<i64>]) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| match (times[e.from.0], times[e.to.0]) {
                (Some(a), Some(b)) => b - a > e.weight,
                _ => false,
            })
            .map(|(i, _)| i)
            .collect()
    }

    fn label(&self, origin: &EdgeOrigin) -> String {
        let name = |event: usize| {
            self.events
                .get(event)
                .map(|e| e.name.as_str())
                .unwrap_or("?")
        };
        match *origin {
            EdgeOrigin::Horizon { event } => format!("horizon {}", name(event)),
            EdgeOrigin::DurationWindow { event } => format!("duration {}", name(event)),
            EdgeOrigin::Constraint { event, index } => format!("{}#{index}", name(event)),
            EdgeOrigin::Inferred { event, index } => format!("{}~{index}", name(event)),
            EdgeOrigin::Allocation { event } => format!("alloc {}", name(event)),
            EdgeOrigin::External { id } => format!("e{id}"),
        }
    }

    /// Graphviz rendering, nodes labelled `datum`, `NAME_S`, `NAME_E`.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph stn {\n  rankdir=LR;\n");
        for node in &self.nodes {
            let _ = writeln!(out, "  \"{}\";", escape(&node.to_string()));
        }
        for edge in &self.edges {
            let mut label = format!("{} ({})", edge.weight, self.label(&edge.origin));
            if edge.relaxation_count > 0 {
                let _ = write!(label, " relaxed x{}", edge.relaxation_count);
            }
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{}\"];",
                escape(&self.nodes[edge.from.0].to_string()),
                escape(&self.nodes[edge.to.0].to_string()),
                escape(&label)
            );
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Feasible window of every node: `lower <= time(n) <= upper`.
///
/// Stored as shortest distances from the datum (`upper`) and to the datum
/// (`-lower`), so both directions update by plain edge relaxation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeBounds {
    from_datum: Vec<i64>,
    to_datum: Vec<i64>,
}

impl TimeBounds {
    pub fn len(&self) -> usize {
        self.from_datum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.from_datum.is_empty()
    }

    /// `None` when the node has no upper bound.
    pub fn upper(&self, ix: NodeIx) -> Option<i64> {
        let d = self.from_datum[ix.0];
        (d < INF).then_some(d)
    }

    /// `None` when the node has no lower bound.
    pub fn lower(&self, ix: NodeIx) -> Option<i64> {
        let d = self.to_datum[ix.0];
        (d < INF).then_some(-d)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("negative cycle of weight {weight} through {} edges", edges.len())]
pub struct NegativeCycle {
    /// Edge indices forming the cycle, in path order.
    pub edges: Vec<usize>,
    pub weight: i64,
}

/// Upper and lower bounds for every node, or a negative-cycle witness.
///
/// The whole graph is checked for negative cycles, including parts not
/// connected to the datum.
pub fn compute_bounds(g: &DistanceGraph) -> Result<TimeBounds, NegativeCycle> {
    if let Some(cycle) = find_negative_cycle(g) {
        return Err(cycle);
    }
    let datum = g.datum().0;
    Ok(TimeBounds {
        from_datum: bellman_ford(g, datum, true),
        to_datum: bellman_ford(g, datum, false),
    })
}

/// Single-source distances; `forward = false` walks reversed edges.
/// Assumes no negative cycle.
fn bellman_ford(g: &DistanceGraph, source: usize, forward: bool) -> Vec<i64> {
    let n = g.node_count();
    let mut dist = vec![INF; n];
    dist[source] = 0;
    for _ in 0..n {
        let mut changed = false;
        for e in &g.edges {
            let (a, b) = if forward {
                (e.from.0, e.to.0)
            } else {
                (e.to.0, e.from.0)
            };
            if dist[a] < INF && dist[a] + e.weight < dist[b] {
                dist[b] = dist[a] + e.weight;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

fn find_negative_cycle(g: &DistanceGraph) -> Option<NegativeCycle> {
    let n = g.node_count();
    let mut dist = vec![0i64; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut last = None;
    for _ in 0..n {
        last = None;
        for (i, e) in g.edges.iter().enumerate() {
            if dist[e.from.0] + e.weight < dist[e.to.0] {
                dist[e.to.0] = dist[e.from.0] + e.weight;
                parent[e.to.0] = Some(i);
                last = Some(e.to.0);
            }
        }
        last?;
    }
    // Still relaxing after n passes: walk back n steps to land on the cycle.
    let mut node = last?;
    for _ in 0..n {
        node = g.edges[parent[node]?].from.0;
    }
    let mut edges = Vec::new();
    let mut cur = node;
    loop {
        let e = parent[cur]?;
        edges.push(e);
        cur = g.edges[e].from.0;
        if cur == node {
            break;
        }
    }
    edges.reverse();
    let weight = edges.iter().map(|&e| g.edges[e].weight).sum();
    Some(NegativeCycle { edges, weight })
}

/// Returned when an edge would close a negative cycle.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("edge {:?} -> {:?} (weight {}) makes the network inconsistent", edge.from, edge.to, edge.weight)]
pub struct Infeasible {
    pub edge: Edge,
}

/// Adds `edge` if it keeps the network consistent, tightening `bounds` in
/// place. On failure neither the graph nor the bounds change.
///
/// Bounds are updated by label-correcting propagation from the new edge's
/// endpoints; afterwards they equal `compute_bounds` of the grown graph.
pub fn add_edge_checked(
    g: &mut DistanceGraph,
    bounds: &mut TimeBounds,
    edge: Edge,
) -> Result<usize, Infeasible> {
    let (u, v, w) = (edge.from.0, edge.to.0, edge.weight);
    if u >= g.node_count() || v >= g.node_count() {
        return Err(Infeasible { edge });
    }
    if u == v {
        if w < 0 {
            return Err(Infeasible { edge });
        }
        return g.add_edge(edge.clone()).map_err(|_| Infeasible { edge });
    }
    let mut next = bounds.clone();
    // With a finite endpoint label the propagation itself sees any cycle
    // through the new edge; otherwise search for v ~> u explicitly.
    let up_u = next.from_datum[u];
    let down_v = next.to_datum[v];
    if up_u >= INF && down_v >= INF && closes_negative_cycle(g, u, v, w) {
        return Err(Infeasible { edge });
    }
    if up_u < INF
        && up_u + w < next.from_datum[v]
        && !propagate(g, &mut next.from_datum, v, up_u + w, u, true)
    {
        return Err(Infeasible { edge });
    }
    if down_v < INF
        && down_v + w < next.to_datum[u]
        && !propagate(g, &mut next.to_datum, u, down_v + w, v, false)
    {
        return Err(Infeasible { edge });
    }
    match g.add_edge(edge.clone()) {
        Ok(id) => {
            *bounds = next;
            Ok(id)
        }
        Err(_) => Err(Infeasible { edge }),
    }
}

/// Lowers `dist[start]` to `value` and relaxes onwards. Returns false if the
/// label of `sentinel` would improve, which means the edge being inserted
/// closes a negative cycle.
fn propagate(
    g: &DistanceGraph,
    dist: &mut [i64],
    start: usize,
    value: i64,
    sentinel: usize,
    forward: bool,
) -> bool {
    dist[start] = value;
    let mut queue = VecDeque::from([start]);
    let mut queued = vec![false; dist.len()];
    queued[start] = true;
    while let Some(x) = queue.pop_front() {
        queued[x] = false;
        let adjacent = if forward {
            &g.outgoing[x]
        } else {
            &g.incoming[x]
        };
        for &e in adjacent {
            let edge = &g.edges[e];
            let y = if forward { edge.to.0 } else { edge.from.0 };
            let candidate = dist[x] + edge.weight;
            if candidate < dist[y] {
                if y == sentinel {
                    return false;
                }
                dist[y] = candidate;
                if !queued[y] {
                    queued[y] = true;
                    queue.push_back(y);
                }
            }
        }
    }
    true
}

fn closes_negative_cycle(g: &DistanceGraph, u: usize, v: usize, w: i64) -> bool {
    let dist = bellman_ford(g, v, true);
    dist[u] < INF && dist[u] + w < 0
}

/// Shortest distances from `source`, `None` where unreachable. Assumes no
/// negative cycle.
pub(crate) fn shortest_from(g: &DistanceGraph, source: NodeIx) -> Vec<Option<i64>> {
    bellman_ford(g, source.0, true)
        .into_iter()
        .map(|d| (d < INF).then_some(d))
        .collect()
}

/// Relaxation knobs and search limits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// How many times a conflicting edge is loosened before it is dropped.
    pub k: u32,
    /// Minutes added to a conflicting edge per attempt.
    pub delta_t: i64,
    #[serde(with = "millis")]
    pub max_search_time: Duration,
    pub max_reflect_iters: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            k: 16,
            delta_t: 15,
            max_search_time: Duration::from_secs(1),
            max_reflect_iters: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("solver setting `{0}` must be strictly positive")]
pub struct ConfigError(pub &'static str);

impl SolverConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k == 0 {
            return Err(ConfigError("k"));
        }
        if self.delta_t <= 0 {
            return Err(ConfigError("delta_t"));
        }
        if self.max_search_time.is_zero() {
            return Err(ConfigError("max_search_time"));
        }
        if self.max_reflect_iters == 0 {
            return Err(ConfigError("max_reflect_iters"));
        }
        Ok(())
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

/// An edge that was loosened to restore consistency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelaxedEdge {
    /// The edge as finally inserted.
    pub edge: Edge,
    /// Total minutes added to the original weight.
    pub delta: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RelaxationReport {
    pub relaxed: Vec<RelaxedEdge>,
    /// Edges (at their original weight) left out of the final graph.
    pub dropped: Vec<Edge>,
}

impl RelaxationReport {
    pub fn is_empty(&self) -> bool {
        self.relaxed.is_empty() && self.dropped.is_empty()
    }

    /// One line per affected constraint, e.g. `lunch: starts at 12:00 relaxed by 30 min`.
    pub fn summary(&self, req: &PlanRequest) -> Vec<String> {
        let describe = |origin: &EdgeOrigin| {
            let event = origin
                .event()
                .and_then(|i| req.events.get(i))
                .map(|e| e.name.as_str())
                .unwrap_or("?");
            match origin.constraint(req) {
                Some(c) => format!("{event}: {c}"),
                None if matches!(origin, EdgeOrigin::Horizon { .. }) => format!("{event}: horizon"),
                None => format!("{event}: duration window"),
            }
        };
        let mut lines = Vec::new();
        let mut last = None;
        for r in &self.relaxed {
            if last == Some(r.edge.origin) {
                continue;
            }
            last = Some(r.edge.origin);
            lines.push(format!("{} relaxed by {} min", describe(&r.edge.origin), r.delta));
        }
        last = None;
        for e in &self.dropped {
            if last == Some(e.origin) {
                continue;
            }
            last = Some(e.origin);
            lines.push(format!("{} dropped", describe(&e.origin)));
        }
        lines
    }
}

/// Edge groups in insertion order. A group is inserted, relaxed and dropped
/// as a unit; `starts at`/`ends at` produce two-edge groups.
fn edge_groups(req: &PlanRequest, g: &DistanceGraph) -> Result<Vec<Vec<Edge>>, RequestError> {
    let datum = g.datum();
    let h_start = i64::from(req.horizon.start.minutes());
    let h_end = i64::from(req.horizon.end.minutes());
    let h_len = h_end - h_start;
    let mut groups = Vec::new();

    for (i, event) in req.events.iter().enumerate() {
        let EventNodes { start, end, .. } = *g.event(i);
        let origin = EdgeOrigin::Horizon { event: i };
        groups.push(vec![Edge::new(start, datum, -h_start, origin)]);
        groups.push(vec![Edge::new(datum, end, h_end, origin)]);

        let (lo, hi) = duration_window(&event.constraints, h_len);
        let origin = EdgeOrigin::DurationWindow { event: i };
        groups.push(vec![Edge::new(end, start, -lo, origin)]);
        groups.push(vec![Edge::new(start, end, hi, origin)]);
    }

    let mut inferred = Vec::new();
    for (i, event) in req.events.iter().enumerate() {
        for (j, c) in event.constraints.iter().enumerate() {
            groups.push(encode(req, g, i, c, EdgeOrigin::Constraint { event: i, index: j })?);
        }
        for (j, c) in event.inferred.iter().enumerate() {
            inferred.push(encode(req, g, i, c, EdgeOrigin::Inferred { event: i, index: j })?);
        }
    }
    groups.extend(inferred);
    Ok(groups)
}

/// Builtin `[min, max]` duration for an event given its user constraints.
///
/// Events without duration constraints get exactly [`DEFAULT_DURATION`]
/// unless both endpoints are pinned. Otherwise the builtin window only
/// keeps durations positive and leaves the rest to the user edges.
fn duration_window(constraints: &[Constraint], horizon_len: i64) -> (i64, i64) {
    let min_max = constraints
        .iter()
        .filter_map(|c| match c {
            Constraint::MaxDuration(d) => Some(i64::from(d.minutes())),
            _ => None,
        })
        .min();
    let has_min = constraints
        .iter()
        .any(|c| matches!(c, Constraint::MinDuration(_)));
    let pinned = constraints.iter().any(|c| matches!(c, Constraint::StartsAt(_)))
        && constraints.iter().any(|c| matches!(c, Constraint::EndsAt(_)));
    let hi = horizon_len.max(1);
    match (has_min, min_max) {
        _ if pinned => (1, hi),
        (true, _) => (1, hi),
        (false, Some(max)) => (DEFAULT_DURATION.min(max).max(1), hi),
        (false, None) => (DEFAULT_DURATION, DEFAULT_DURATION),
    }
}

fn encode(
    req: &PlanRequest,
    g: &DistanceGraph,
    event: usize,
    c: &Constraint,
    origin: EdgeOrigin,
) -> Result<Vec<Edge>, RequestError> {
    let datum = g.datum();
    let EventNodes { start, end, .. } = *g.event(event);
    let at = |t: &crate::model::TimePoint| i64::from(t.minutes());
    let partner = |name: &str| {
        req.position(name)
            .map(|p| g.event(p).clone())
            .ok_or_else(|| RequestError::UnknownEventReference {
                event: req.events[event].name.clone(),
                target: name.to_string(),
            })
    };
    Ok(match c {
        Constraint::StartsAt(t) => vec![
            Edge::new(datum, start, at(t), origin),
            Edge::new(start, datum, -at(t), origin),
        ],
        Constraint::EndsAt(t) => vec![
            Edge::new(datum, end, at(t), origin),
            Edge::new(end, datum, -at(t), origin),
        ],
        Constraint::EndsBefore(t) => vec![Edge::new(datum, end, at(t), origin)],
        Constraint::StartsAfter(t) => vec![Edge::new(start, datum, -at(t), origin)],
        Constraint::StartsBefore(t) => vec![Edge::new(datum, start, at(t), origin)],
        Constraint::EndsAfter(t) => vec![Edge::new(end, datum, -at(t), origin)],
        Constraint::MinDuration(d) => vec![Edge::new(end, start, -i64::from(d.minutes()), origin)],
        Constraint::MaxDuration(d) => vec![Edge::new(start, end, i64::from(d.minutes()), origin)],
        // end(self) <= start(other)
        Constraint::BeforeEvent(name) => vec![Edge::new(partner(name)?.start, end, 0, origin)],
        // start(self) >= end(other)
        Constraint::AfterEvent(name) => vec![Edge::new(start, partner(name)?.end, 0, origin)],
    })
}

fn event_graph(req: &PlanRequest) -> DistanceGraph {
    let mut g = DistanceGraph::new();
    for event in &req.events {
        g.add_event(&event.name);
    }
    g
}

/// Encodes a request as a distance graph: builtin edges, then user edges in
/// declaration order, then inferred edges. Nothing is checked for
/// consistency here.
pub fn build_stn(req: &PlanRequest) -> Result<DistanceGraph, RequestError> {
    req.validate()?;
    let mut g = event_graph(req);
    for group in edge_groups(req, &g)? {
        for edge in group {
            g.add_edge(edge).expect("encoded edges are unique per origin");
        }
    }
    Ok(g)
}

/// Inserts the request's edges one group at a time, loosening any group that
/// would create a negative cycle by `delta_t` per attempt, at most `k`
/// times, and dropping it after that.
pub fn relax_and_bound(
    req: &PlanRequest,
    cfg: &SolverConfig,
) -> Result<(DistanceGraph, TimeBounds, RelaxationReport), RequestError> {
    req.validate()?;
    let mut g = event_graph(req);
    let groups = edge_groups(req, &g)?;
    let mut bounds = compute_bounds(&g).expect("edgeless graph is consistent");
    let mut report = RelaxationReport::default();

    for group in groups {
        let mut inserted = false;
        for attempt in 0..=cfg.k {
            let delta = i64::from(attempt) * cfg.delta_t;
            let candidate: Vec<Edge> = group
                .iter()
                .map(|e| Edge {
                    weight: e.weight + delta,
                    relaxation_count: attempt,
                    ..e.clone()
                })
                .collect();
            if insert_group(&mut g, &mut bounds, &candidate) {
                if attempt > 0 {
                    report
                        .relaxed
                        .extend(candidate.into_iter().map(|edge| RelaxedEdge { edge, delta }));
                }
                inserted = true;
                break;
            }
        }
        if !inserted {
            report.dropped.extend(group);
        }
    }
    Ok((g, bounds, report))
}

/// All-or-nothing insertion of a group of edges.
pub(crate) fn insert_group(g: &mut DistanceGraph, bounds: &mut TimeBounds, group: &[Edge]) -> bool {
    let len = g.edge_count();
    let snapshot = bounds.clone();
    for edge in group {
        if add_edge_checked(g, bounds, edge.clone()).is_err() {
            g.truncate_edges(len);
            *bounds = snapshot;
            return false;
        }
    }
    true
}

/// Checks whether `constraints` (encoded for `event`) can be added to a
/// consistent graph; on success the graph keeps them.
pub(crate) fn try_insert_constraint(
    req: &PlanRequest,
    g: &mut DistanceGraph,
    bounds: &mut TimeBounds,
    event: usize,
    c: &Constraint,
    origin: EdgeOrigin,
) -> Result<bool, RequestError> {
    let group = encode(req, g, event, c, origin)?;
    Ok(insert_group(g, bounds, &group))
}
