//! Depth-first search for a non-overlapping, makespan-minimal schedule over
//! a consistent distance graph.
//!
//! Events are allocated in chronological order. At each level the
//! unallocated events whose predecessors are placed and whose start window
//! is still open are tried in ascending order of slack, each at its
//! earliest start and with its shortest feasible duration. Allocations are
//! pinned into the graph so the remaining bounds tighten, and undone on
//! backtrack.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::model::{name_key, Constraint, Plan, PlanEntry, PlanRequest, RequestError, TimePoint};
use crate::stn::{
    insert_group, relax_and_bound, DistanceGraph, Edge, EdgeOrigin, RelaxationReport, SolverConfig,
    TimeBounds,
};

/// A partial allocation during search.
#[derive(Debug, Clone)]
pub struct SearchState {
    /// Allocated entries in start order.
    pub allocated: Vec<PlanEntry>,
    /// Names of events still to place.
    pub remaining: BTreeSet<String>,
    pub bounds: TimeBounds,
}

impl SearchState {
    /// The empty allocation over `req`.
    pub fn initial(req: &PlanRequest, bounds: TimeBounds) -> Self {
        SearchState {
            allocated: Vec::new(),
            remaining: req.events.iter().map(|e| e.name.clone()).collect(),
            bounds,
        }
    }

    /// End of the last allocated entry, or the horizon start.
    pub fn last_end(&self, req: &PlanRequest) -> i64 {
        self.allocated
            .last()
            .map(|e| i64::from(e.end.minutes()))
            .unwrap_or_else(|| i64::from(req.horizon.start.minutes()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleResult {
    pub plan: Plan,
    /// Every requested event was placed.
    pub complete: bool,
    pub makespan: TimePoint,
    pub relaxation: RelaxationReport,
    /// False when the time cutoff stopped the search.
    pub search_exhausted: bool,
}

/// Minutes left before `event` can no longer start after `last_end`.
/// Negative when that moment has already passed.
pub fn compute_slack(g: &DistanceGraph, event: usize, bounds: &TimeBounds, last_end: i64) -> i64 {
    bounds
        .upper(g.event(event).start)
        .map_or(i64::MAX / 4, |ub| ub - last_end)
}

/// For every event, the events that must be allocated before it. Only
/// ordering edges kept at their original weight count; a loosened ordering
/// is enforced through the bounds alone.
fn predecessors(g: &DistanceGraph, req: &PlanRequest) -> Vec<Vec<usize>> {
    let mut preds = vec![Vec::new(); req.events.len()];
    for edge in g.edges() {
        if edge.relaxation_count > 0 {
            continue;
        }
        let Some(event) = edge.origin.event() else {
            continue;
        };
        match edge.origin.constraint(req) {
            Some(Constraint::BeforeEvent(other)) => {
                if let Some(p) = req.position(other) {
                    preds[p].push(event);
                }
            }
            Some(Constraint::AfterEvent(other)) => {
                if let Some(p) = req.position(other) {
                    preds[event].push(p);
                }
            }
            _ => {}
        }
    }
    for p in &mut preds {
        p.sort_unstable();
        p.dedup();
    }
    preds
}

/// `(event, slack)` for every event that may be allocated next, by
/// ascending slack and then name.
fn candidates(
    g: &DistanceGraph,
    req: &PlanRequest,
    preds: &[Vec<usize>],
    placed: &[bool],
    bounds: &TimeBounds,
    last_end: i64,
) -> Vec<(usize, i64)> {
    let mut out: Vec<(usize, i64)> = (0..placed.len())
        .filter(|&e| !placed[e])
        .filter(|&e| preds[e].iter().all(|&p| placed[p]))
        .map(|e| (e, compute_slack(g, e, bounds, last_end)))
        .filter(|&(_, slack)| slack >= 0)
        .collect();
    out.sort_by(|a, b| {
        a.1.cmp(&b.1)
            .then_with(|| name_key(&req.events[a.0].name).cmp(&name_key(&req.events[b.0].name)))
    });
    out
}

/// Names of the events that can be allocated next from `state`, ascending
/// by slack with ties broken by name.
pub fn feasible_next(state: &SearchState, g: &DistanceGraph, req: &PlanRequest) -> Vec<String> {
    let preds = predecessors(g, req);
    let remaining: BTreeSet<String> = state.remaining.iter().map(|n| name_key(n)).collect();
    let placed: Vec<bool> = req
        .events
        .iter()
        .map(|e| !remaining.contains(&e.key()))
        .collect();
    candidates(g, req, &preds, &placed, &state.bounds, state.last_end(req))
        .into_iter()
        .map(|(e, _)| req.events[e].name.clone())
        .collect()
}

#[derive(Debug, Clone)]
struct Candidate {
    /// `(event, start, end)` in allocation order.
    entries: Vec<(usize, i64, i64)>,
    makespan: i64,
}

impl Candidate {
    /// More events, then smaller makespan, then earlier start sequence.
    fn better_than(&self, other: &Candidate) -> bool {
        match other.entries.len().cmp(&self.entries.len()) {
            Ordering::Less => return true,
            Ordering::Greater => return false,
            Ordering::Equal => {}
        }
        match self.makespan.cmp(&other.makespan) {
            Ordering::Less => return true,
            Ordering::Greater => return false,
            Ordering::Equal => {}
        }
        let starts = |c: &Candidate| c.entries.iter().map(|e| e.1).collect::<Vec<_>>();
        starts(self) < starts(other)
    }
}

struct Search<'a> {
    req: &'a PlanRequest,
    graph: DistanceGraph,
    preds: Vec<Vec<usize>>,
    min_duration: Vec<i64>,
    started: Instant,
    cfg: &'a SolverConfig,
    best: Option<Candidate>,
    cut_off: bool,
    placed: Vec<bool>,
    path: Vec<(usize, i64, i64)>,
}

impl Search<'_> {
    fn run(&mut self, bounds: TimeBounds, last_end: i64) {
        if self.started.elapsed() >= self.cfg.max_search_time {
            self.cut_off = true;
            return;
        }
        let next = candidates(
            &self.graph,
            self.req,
            &self.preds,
            &self.placed,
            &bounds,
            last_end,
        );
        if next.is_empty() {
            self.record(last_end);
            return;
        }
        if self.cannot_improve(&bounds, last_end) {
            return;
        }
        let datum = self.graph.datum();
        for (event, _) in next {
            let nodes = self.graph.event(event).clone();
            let Some(lower) = bounds.lower(nodes.start) else {
                continue;
            };
            let start = lower.max(last_end);
            let mark = self.graph.edge_count();
            let mut pinned = bounds.clone();
            let origin = EdgeOrigin::Allocation { event };
            let pin_start = [
                Edge::new(datum, nodes.start, start, origin),
                Edge::new(nodes.start, datum, -start, origin),
            ];
            if !insert_group(&mut self.graph, &mut pinned, &pin_start) {
                continue;
            }
            let Some(end) = pinned.lower(nodes.end) else {
                self.graph.truncate_edges(mark);
                continue;
            };
            let pin_end = [
                Edge::new(datum, nodes.end, end, origin),
                Edge::new(nodes.end, datum, -end, origin),
            ];
            if end <= start || !insert_group(&mut self.graph, &mut pinned, &pin_end) {
                self.graph.truncate_edges(mark);
                continue;
            }
            self.placed[event] = true;
            self.path.push((event, start, end));
            self.run(pinned, end);
            self.path.pop();
            self.placed[event] = false;
            self.graph.truncate_edges(mark);
            if self.cut_off {
                return;
            }
        }
    }

    fn record(&mut self, last_end: i64) {
        let found = Candidate {
            entries: self.path.clone(),
            makespan: if self.path.is_empty() { 0 } else { last_end },
        };
        if self.best.as_ref().is_none_or(|b| found.better_than(b)) {
            self.best = Some(found);
        }
    }

    /// Branch-and-bound against a complete incumbent: every completion of
    /// this branch ends no earlier than `bound`.
    fn cannot_improve(&self, bounds: &TimeBounds, last_end: i64) -> bool {
        let Some(best) = &self.best else {
            return false;
        };
        if best.entries.len() < self.placed.len() {
            return false;
        }
        let mut total = last_end;
        let mut latest_end = last_end;
        for (e, &placed) in self.placed.iter().enumerate() {
            if placed {
                continue;
            }
            total += self.min_duration[e];
            if let Some(lb) = bounds.lower(self.graph.event(e).end) {
                latest_end = latest_end.max(lb);
            }
        }
        let bound = total.max(latest_end);
        match bound.cmp(&best.makespan) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => {
                let prefix: Vec<i64> = self.path.iter().map(|e| e.1).collect();
                let theirs: Vec<i64> = best.entries[..prefix.len()].iter().map(|e| e.1).collect();
                prefix >= theirs
            }
        }
    }
}

/// Shortest duration of each event implied by the graph.
fn minimum_durations(g: &DistanceGraph) -> Vec<i64> {
    g.events()
        .iter()
        .map(|ev| {
            let dist = crate::stn::shortest_from(g, ev.end);
            dist.get(ev.start.0).copied().flatten().map_or(1, |d| (-d).max(1))
        })
        .collect()
}

/// Searches for the best schedule over a consistent graph and its bounds.
/// Neither input is modified.
pub fn search(
    graph: &DistanceGraph,
    bounds: &TimeBounds,
    req: &PlanRequest,
    cfg: &SolverConfig,
) -> ScheduleResult {
    let mut s = Search {
        req,
        graph: graph.clone(),
        preds: predecessors(graph, req),
        min_duration: minimum_durations(graph),
        started: Instant::now(),
        cfg,
        best: None,
        cut_off: false,
        placed: vec![false; req.events.len()],
        path: Vec::new(),
    };
    let last_end = i64::from(req.horizon.start.minutes());
    s.run(bounds.clone(), last_end);

    let best = s.best.unwrap_or(Candidate {
        entries: Vec::new(),
        makespan: 0,
    });
    let entries = best
        .entries
        .iter()
        .map(|&(e, start, end)| {
            PlanEntry::new(
                &req.events[e].name,
                TimePoint::from_minutes(start).expect("start within horizon"),
                TimePoint::from_minutes(end).expect("end within horizon"),
            )
            .expect("allocations have positive length")
        })
        .collect();
    let plan = Plan::new(entries);
    ScheduleResult {
        complete: plan.len() == req.events.len(),
        makespan: plan.makespan(),
        plan,
        relaxation: RelaxationReport::default(),
        search_exhausted: !s.cut_off,
    }
}

/// Relaxes the request into a consistent network and searches it.
pub fn plan(req: &PlanRequest, cfg: &SolverConfig) -> Result<ScheduleResult, RequestError> {
    let (graph, bounds, relaxation) = relax_and_bound(req, cfg)?;
    let mut result = search(&graph, &bounds, req, cfg);
    result.relaxation = relaxation;
    Ok(result)
}

/// Edges of `graph` (a relaxed network for `req`) that `plan` violates.
/// Edges touching an event absent from the plan are not checked.
pub fn violated_edges(graph: &DistanceGraph, req: &PlanRequest, plan: &Plan) -> Vec<Edge> {
    let mut times = vec![None; graph.node_count()];
    times[graph.datum().0] = Some(0);
    for entry in plan {
        if let Some(i) = req.position(&entry.event) {
            let nodes = graph.event(i);
            times[nodes.start.0] = Some(i64::from(entry.start.minutes()));
            times[nodes.end.0] = Some(i64::from(entry.end.minutes()));
        }
    }
    graph
        .violated_edges(&times)
        .into_iter()
        .map(|i| graph.edges()[i].clone())
        .collect()
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::model::{Constraint, DurationMinutes, EventSpec, Horizon};
    use crate::testing::min_makespan_by_enumeration;
    use proptest::prelude::*;

    const H0: u32 = 480;
    const H1: u32 = 780;

    fn t(m: u32) -> TimePoint {
        TimePoint::new(m).unwrap()
    }

    /// Constraints whose constants sit on a 15-minute grid. Durations are
    /// lower bounds only, so every event is free to stretch.
    fn clause(n: usize) -> impl Strategy<Value = Constraint> {
        prop_oneof![
            (2u32..=6).prop_map(|k| Constraint::MinDuration(DurationMinutes::new(15 * k).unwrap())),
            (0u32..=10).prop_map(|k| Constraint::StartsAfter(t(H0 + 30 * k))),
            (2u32..=10).prop_map(|k| Constraint::EndsBefore(t(H0 + 30 * k))),
            (0u32..=8).prop_map(|k| Constraint::StartsBefore(t(H0 + 30 * k))),
            (0..n).prop_map(|p| Constraint::BeforeEvent(format!("e{p}"))),
            (0..n).prop_map(|p| Constraint::AfterEvent(format!("e{p}"))),
        ]
    }

    fn request() -> impl Strategy<Value = PlanRequest> {
        (1usize..=4)
            .prop_flat_map(|n| proptest::collection::vec(proptest::collection::vec(clause(n), 0..3), n))
            .prop_map(|per_event| {
                let events = per_event
                    .into_iter()
                    .enumerate()
                    .map(|(i, cs)| {
                        let name = format!("e{i}");
                        let cs = cs
                            .into_iter()
                            .filter(|c| c.target() != Some(name.as_str()))
                            .collect();
                        EventSpec::new(&name, cs)
                    })
                    .collect();
                let mut req = PlanRequest::new(events);
                req.horizon = Horizon { start: t(H0), end: t(H1) };
                req
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn plans_never_overlap(req in request()) {
            let r = plan(&req, &SolverConfig::default()).unwrap();
            let entries = r.plan.entries();
            for (i, a) in entries.iter().enumerate() {
                for b in &entries[i + 1..] {
                    prop_assert!(!a.overlaps(b), "{a:?} overlaps {b:?}");
                }
            }
            let (g, _, _) = relax_and_bound(&req, &SolverConfig::default()).unwrap();
            prop_assert!(violated_edges(&g, &req, &r.plan).is_empty());
        }

        #[test]
        fn makespan_matches_enumeration(req in request()) {
            let r = plan(&req, &SolverConfig::default()).unwrap();
            prop_assume!(r.relaxation.is_empty());
            prop_assert!(r.search_exhausted);
            match min_makespan_by_enumeration(&req, 15) {
                Some(best) => {
                    prop_assert!(r.complete, "oracle found a full schedule: {}", req.to_lines());
                    prop_assert_eq!(i64::from(r.makespan.minutes()), best);
                }
                None => prop_assert!(!r.complete),
            }
        }

        #[test]
        fn planning_is_deterministic(req in request()) {
            let cfg = SolverConfig::default();
            prop_assert_eq!(plan(&req, &cfg).unwrap(), plan(&req, &cfg).unwrap());
        }
    }
}
