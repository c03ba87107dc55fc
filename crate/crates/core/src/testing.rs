//! Brute-force reference solvers for tests.
//!
//! Nothing here shares code with the solver paths it is used to check:
//! bounds come from Floyd-Warshall over a dense matrix and schedules from
//! plain enumeration on a time grid.

use crate::model::{name_key, Constraint, PlanRequest};
use crate::stn::{DistanceGraph, Edge, EdgeOrigin, NodeId, NodeIx};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FwResult {
    NegativeCycle,
    Bounds {
        lower: Vec<Option<i64>>,
        upper: Vec<Option<i64>>,
    },
}

/// All-pairs shortest paths; bounds are read off the datum row and column.
#[allow(clippy::needless_range_loop)]
pub fn floyd_warshall(g: &DistanceGraph) -> FwResult {
    let n = g.node_count();
    let mut dist: Vec<Vec<Option<i64>>> = vec![vec![None; n]; n];
    for (i, row) in dist.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for e in g.edges() {
        let cell = &mut dist[e.from.0][e.to.0];
        *cell = Some(cell.map_or(e.weight, |w| w.min(e.weight)));
    }
    for k in 0..n {
        for i in 0..n {
            let Some(ik) = dist[i][k] else { continue };
            for j in 0..n {
                if let Some(kj) = dist[k][j] {
                    let via = ik + kj;
                    if dist[i][j].is_none_or(|d| via < d) {
                        dist[i][j] = Some(via);
                    }
                }
            }
        }
    }
    if (0..n).any(|i| dist[i][i].is_some_and(|d| d < 0)) {
        return FwResult::NegativeCycle;
    }
    let datum = g.datum().0;
    FwResult::Bounds {
        upper: (0..n).map(|i| dist[datum][i]).collect(),
        lower: (0..n).map(|i| dist[i][datum].map(|d| -d)).collect(),
    }
}

/// A graph with `n` nodes (datum first) and the given `(from, to, weight)`
/// edges, endpoints taken modulo `n`.
pub fn random_graph(n: usize, edges: &[(usize, usize, i64)]) -> DistanceGraph {
    let n = n.max(1);
    let mut g = DistanceGraph::new();
    for i in 1..n {
        g.add_node(NodeId::Start(format!("v{i}")));
    }
    for (id, &(a, b, w)) in edges.iter().enumerate() {
        g.add_edge(Edge::new(
            NodeIx(a % n),
            NodeIx(b % n),
            w,
            EdgeOrigin::External { id },
        ))
        .expect("distinct origins");
    }
    g
}

/// Every assignment of node times on `grid` within `[lo, hi]` that satisfies
/// all edges of `g`; the datum is pinned to 0.
pub fn enumerate_assignments(g: &DistanceGraph, lo: i64, hi: i64, grid: i64) -> Vec<Vec<i64>> {
    let n = g.node_count();
    let values: Vec<i64> = (0..)
        .map(|k| lo + k * grid)
        .take_while(|&v| v <= hi)
        .collect();
    let mut out = Vec::new();
    let mut current = vec![0i64; n];
    fn rec(
        g: &DistanceGraph,
        node: usize,
        values: &[i64],
        current: &mut Vec<i64>,
        out: &mut Vec<Vec<i64>>,
    ) {
        if node == current.len() {
            out.push(current.clone());
            return;
        }
        for &v in values {
            current[node] = v;
            let ok = g.edges().iter().all(|e| {
                let (a, b) = (e.from.0, e.to.0);
                if a > node || b > node {
                    return true;
                }
                current[b] - current[a] <= e.weight
            });
            if ok {
                rec(g, node + 1, values, current, out);
            }
        }
    }
    if n > 0 {
        current[0] = 0;
        let ok = g
            .edges()
            .iter()
            .filter(|e| e.from.0 == 0 && e.to.0 == 0)
            .all(|e| e.weight >= 0);
        if ok {
            rec(g, 1, &values, &mut current, &mut out);
        }
    }
    out
}

/// Whether `(start, end)` satisfies one constraint of an event, with
/// `partner` giving the interval of a referenced event.
fn holds(c: &Constraint, start: i64, end: i64, partner: Option<(i64, i64)>) -> bool {
    let m = |t: &crate::model::TimePoint| i64::from(t.minutes());
    match c {
        Constraint::StartsAt(t) => start == m(t),
        Constraint::EndsAt(t) => end == m(t),
        Constraint::EndsBefore(t) => end <= m(t),
        Constraint::StartsAfter(t) => start >= m(t),
        Constraint::StartsBefore(t) => start <= m(t),
        Constraint::EndsAfter(t) => end >= m(t),
        Constraint::MinDuration(d) => end - start >= i64::from(d.minutes()),
        Constraint::MaxDuration(d) => end - start <= i64::from(d.minutes()),
        Constraint::BeforeEvent(_) => partner.is_none_or(|(s, _)| end <= s),
        Constraint::AfterEvent(_) => partner.is_none_or(|(_, e)| start >= e),
    }
}

/// Duration an event takes when it carries no duration information.
fn implied_duration_ok(constraints: &[Constraint], start: i64, end: i64) -> bool {
    let has_min = constraints.iter().any(|c| matches!(c, Constraint::MinDuration(_)));
    let max = constraints
        .iter()
        .filter_map(|c| match c {
            Constraint::MaxDuration(d) => Some(i64::from(d.minutes())),
            _ => None,
        })
        .min();
    let pinned = constraints.iter().any(|c| matches!(c, Constraint::StartsAt(_)))
        && constraints.iter().any(|c| matches!(c, Constraint::EndsAt(_)));
    let d = end - start;
    if d < 1 {
        return false;
    }
    if pinned || has_min {
        return true;
    }
    match max {
        Some(max) => d >= 60.min(max),
        None => d == 60,
    }
}

/// Smallest makespan over every non-overlapping assignment on `grid` that
/// satisfies all user constraints of `req`, or `None` if there is none.
pub fn min_makespan_by_enumeration(req: &PlanRequest, grid: i64) -> Option<i64> {
    let h0 = i64::from(req.horizon.start.minutes());
    let h1 = i64::from(req.horizon.end.minutes());
    let n = req.events.len();
    if n == 0 {
        return Some(0);
    }
    let partner_ix = |name: &str| {
        let key = name_key(name);
        req.events.iter().position(|e| e.key() == key)
    };
    // Unary-feasible intervals per event, by ascending end.
    let mut options: Vec<Vec<(i64, i64)>> = Vec::new();
    for event in &req.events {
        let mut opts = Vec::new();
        let mut s = h0;
        while s < h1 {
            let mut e = s + grid;
            while e <= h1 {
                let ok = implied_duration_ok(&event.constraints, s, e)
                    && event
                        .constraints
                        .iter()
                        .filter(|c| c.target().is_none())
                        .all(|c| holds(c, s, e, None));
                if ok {
                    opts.push((s, e));
                }
                e += grid;
            }
            s += grid;
        }
        opts.sort_by_key(|&(s, e)| (e, s));
        options.push(opts);
    }
    let relations: Vec<Vec<(usize, &Constraint)>> = req
        .events
        .iter()
        .map(|e| {
            e.constraints
                .iter()
                .filter_map(|c| c.target().and_then(partner_ix).map(|p| (p, c)))
                .collect()
        })
        .collect();

    let mut best: Option<i64> = None;
    let mut assigned: Vec<Option<(i64, i64)>> = vec![None; n];
    fn rec(
        i: usize,
        options: &[Vec<(i64, i64)>],
        relations: &[Vec<(usize, &Constraint)>],
        assigned: &mut Vec<Option<(i64, i64)>>,
        current_max: i64,
        best: &mut Option<i64>,
    ) {
        if i == options.len() {
            if best.is_none_or(|b| current_max < b) {
                *best = Some(current_max);
            }
            return;
        }
        for &(s, e) in &options[i] {
            if best.is_some_and(|b| e >= b) {
                break;
            }
            let clash = assigned[..i]
                .iter()
                .flatten()
                .any(|&(s2, e2)| s < e2 && s2 < e);
            if clash {
                continue;
            }
            assigned[i] = Some((s, e));
            let mut ok = true;
            // Check relations now that both sides may be known.
            for (j, rels) in relations.iter().enumerate().take(i + 1) {
                for &(p, c) in rels {
                    if p > i || (j != i && p != i) {
                        continue;
                    }
                    let (Some((s1, e1)), Some(other)) = (assigned[j], assigned[p]) else {
                        continue;
                    };
                    if !holds(c, s1, e1, Some(other)) {
                        ok = false;
                    }
                }
            }
            if ok {
                rec(i + 1, options, relations, assigned, current_max.max(e), best);
            }
            assigned[i] = None;
        }
    }
    rec(0, &options, &relations, &mut assigned, 0, &mut best);
    best
}
