//! Plan checking: constraint violations, correctness metrics, commonsense
//! violation rates and the feedback sentences built from them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{name_key, Constraint, ConstraintKind, ParseError, Plan, PlanEntry, PlanRequest};

/// Minimum token-set Jaccard similarity for a renamed event to count as
/// the requested one.
pub const MATCH_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unsatisfied {
    pub event: String,
    pub constraint: Constraint,
    /// The value the constraint was tested against: the start or end time
    /// in minutes, the duration, or the partner's start/end for ordering
    /// constraints. `None` when the partner is not in the plan.
    pub observed: Option<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub missing_events: Vec<String>,
    /// Overlapping entry names, each pair sorted and listed once.
    pub overlaps: Vec<(String, String)>,
    pub unsatisfied: Vec<Unsatisfied>,
}

impl ViolationReport {
    pub fn count(&self) -> usize {
        self.missing_events.len() + self.overlaps.len() + self.unsatisfied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }
}

fn tokens(name: &str) -> BTreeSet<String> {
    name.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Pairs each request event with at most one plan entry, by index.
///
/// Exact matches on the normalized name come first; the rest are paired
/// greedily by descending token similarity, ties going to the earlier
/// request event and then the earlier entry.
pub fn match_events(req: &PlanRequest, plan: &Plan) -> Vec<Option<usize>> {
    let entries = plan.entries();
    let mut matched: Vec<Option<usize>> = vec![None; req.events.len()];
    let mut taken = vec![false; entries.len()];
    for (i, event) in req.events.iter().enumerate() {
        let key = event.key();
        if let Some(j) = (0..entries.len()).find(|&j| !taken[j] && name_key(&entries[j].event) == key) {
            matched[i] = Some(j);
            taken[j] = true;
        }
    }
    let entry_tokens: Vec<_> = entries.iter().map(|e| tokens(&e.event)).collect();
    let mut scored = Vec::new();
    for (i, event) in req.events.iter().enumerate() {
        if matched[i].is_some() {
            continue;
        }
        let mine = tokens(&event.name);
        for (j, theirs) in entry_tokens.iter().enumerate() {
            if taken[j] {
                continue;
            }
            let score = jaccard(&mine, theirs);
            if score >= MATCH_THRESHOLD {
                scored.push((score, i, j));
            }
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    for (_, i, j) in scored {
        if matched[i].is_none() && !taken[j] {
            matched[i] = Some(j);
            taken[j] = true;
        }
    }
    matched
}

/// Whether `entry` satisfies `c`, and the value it was judged on.
fn evaluate(c: &Constraint, entry: &PlanEntry, partner: Option<&PlanEntry>) -> (bool, Option<i64>) {
    let start = i64::from(entry.start.minutes());
    let end = i64::from(entry.end.minutes());
    let m = |t: &crate::model::TimePoint| i64::from(t.minutes());
    match c {
        Constraint::StartsAt(t) => (start == m(t), Some(start)),
        Constraint::EndsAt(t) => (end == m(t), Some(end)),
        Constraint::EndsBefore(t) => (end <= m(t), Some(end)),
        Constraint::StartsAfter(t) => (start >= m(t), Some(start)),
        Constraint::StartsBefore(t) => (start <= m(t), Some(start)),
        Constraint::EndsAfter(t) => (end >= m(t), Some(end)),
        Constraint::MinDuration(d) => (end - start >= i64::from(d.minutes()), Some(end - start)),
        Constraint::MaxDuration(d) => (end - start <= i64::from(d.minutes()), Some(end - start)),
        Constraint::BeforeEvent(_) => match partner {
            Some(p) => {
                let s = i64::from(p.start.minutes());
                (end <= s, Some(s))
            }
            None => (false, None),
        },
        Constraint::AfterEvent(_) => match partner {
            Some(p) => {
                let e = i64::from(p.end.minutes());
                (start >= e, Some(e))
            }
            None => (false, None),
        },
    }
}

/// Outcome of every user constraint on a matched event.
fn judge(req: &PlanRequest, plan: &Plan, matched: &[Option<usize>]) -> Vec<(usize, Constraint, bool, Option<i64>)> {
    let entries = plan.entries();
    let mut out = Vec::new();
    for (i, event) in req.events.iter().enumerate() {
        let Some(j) = matched[i] else { continue };
        for c in &event.constraints {
            let partner = c
                .target()
                .and_then(|t| req.position(t))
                .and_then(|p| matched[p])
                .map(|p| &entries[p]);
            let (ok, observed) = evaluate(c, &entries[j], partner);
            out.push((i, c.clone(), ok, observed));
        }
    }
    out
}

/// Entries overlapping at least one other entry, by index.
fn overlapping(plan: &Plan) -> (Vec<bool>, Vec<(usize, usize)>) {
    let entries = plan.entries();
    let mut flagged = vec![false; entries.len()];
    let mut pairs = Vec::new();
    for i in 0..entries.len() {
        for j in i + 1..entries.len() {
            if entries[j].start >= entries[i].end {
                // Entries are sorted by start.
                break;
            }
            if entries[i].overlaps(&entries[j]) {
                flagged[i] = true;
                flagged[j] = true;
                pairs.push((i, j));
            }
        }
    }
    (flagged, pairs)
}

/// Missing events, overlapping entries, and the user constraints the plan
/// breaks. Inferred constraints are not checked.
pub fn check_plan(req: &PlanRequest, plan: &Plan) -> ViolationReport {
    let matched = match_events(req, plan);
    let entries = plan.entries();
    let missing_events = req
        .events
        .iter()
        .zip(&matched)
        .filter(|(_, m)| m.is_none())
        .map(|(e, _)| e.name.clone())
        .collect();
    let (_, pairs) = overlapping(plan);
    let overlaps: BTreeSet<(String, String)> = pairs
        .into_iter()
        .map(|(i, j)| {
            let (a, b) = (entries[i].event.clone(), entries[j].event.clone());
            if name_key(&a) <= name_key(&b) {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect();
    let unsatisfied = judge(req, plan, &matched)
        .into_iter()
        .filter(|(_, _, ok, _)| !ok)
        .map(|(i, constraint, _, observed)| Unsatisfied {
            event: req.events[i].name.clone(),
            constraint,
            observed,
        })
        .collect();
    ViolationReport {
        missing_events,
        overlaps: overlaps.into_iter().collect(),
        unsatisfied,
    }
}

/// Correctness percentages and commonsense violation rates for one plan.
/// `None` marks a metric whose denominator is zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(rename = "CO")]
    pub co: Option<f64>,
    #[serde(rename = "NO")]
    pub no: Option<f64>,
    #[serde(rename = "DC")]
    pub dc: Option<f64>,
    #[serde(rename = "OC")]
    pub oc: Option<f64>,
    #[serde(rename = "SEC")]
    pub sec: Option<f64>,
    #[serde(rename = "AVG")]
    pub avg_correctness: Option<f64>,
    #[serde(rename = "duration")]
    pub cs_duration: Option<f64>,
    #[serde(rename = "start_end")]
    pub cs_start_end: Option<f64>,
}

fn percent(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 * 100.0 / den as f64)
}

/// Mean of the defined values.
pub fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl MetricsReport {
    pub fn with_commonsense(mut self, cs: &CommonsenseReport) -> Self {
        self.cs_duration = cs.duration;
        self.cs_start_end = cs.start_end;
        self
    }

    /// Mean of the defined commonsense violation rates.
    pub fn avg_commonsense(&self) -> Option<f64> {
        mean_defined([self.cs_duration, self.cs_start_end])
    }

    /// One table row, `-` for undefined values.
    pub fn row(&self) -> String {
        [
            self.co,
            self.no,
            self.dc,
            self.oc,
            self.sec,
            self.avg_correctness,
            self.cs_duration,
            self.cs_start_end,
        ]
        .iter()
        .map(|v| v.map_or_else(|| format!("{:>7}", "-"), |v| format!("{v:>7.2}")))
        .collect::<Vec<_>>()
        .join(" ")
    }

    pub fn header() -> String {
        ["CO", "NO", "DC", "OC", "SEC", "AVG", "dur", "st/end"]
            .iter()
            .map(|h| format!("{h:>7}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn tally(req: &PlanRequest, plan: &Plan, matched: &[Option<usize>]) -> HashMap<ConstraintKind, (usize, usize)> {
    let mut counts: HashMap<ConstraintKind, (usize, usize)> = HashMap::new();
    for (_, c, ok, _) in judge(req, plan, matched) {
        let slot = counts.entry(c.kind()).or_default();
        slot.1 += 1;
        if ok {
            slot.0 += 1;
        }
    }
    counts
}

/// `(satisfied, total)` user constraints of each kind on matched events.
pub fn constraint_tally(req: &PlanRequest, plan: &Plan) -> HashMap<ConstraintKind, (usize, usize)> {
    tally(req, plan, &match_events(req, plan))
}

/// CO, NO, DC, OC, SEC and their mean. Commonsense columns stay empty;
/// see [`MetricsReport::with_commonsense`].
pub fn compute_metrics(req: &PlanRequest, plan: &Plan) -> MetricsReport {
    let matched = match_events(req, plan);
    let covered = matched.iter().filter(|m| m.is_some()).count();
    let (flagged, _) = overlapping(plan);
    let clear = flagged.iter().filter(|f| !**f).count();

    let counts = tally(req, plan, &matched);
    let kind = |k| counts.get(&k).and_then(|&(n, d)| percent(n, d));

    let mut report = MetricsReport {
        co: percent(covered, req.events.len()),
        no: percent(clear, plan.len()),
        dc: kind(ConstraintKind::Duration),
        oc: kind(ConstraintKind::Relative),
        sec: kind(ConstraintKind::Absolute),
        ..MetricsReport::default()
    };
    report.avg_correctness = mean_defined([report.co, report.no, report.dc, report.oc, report.sec]);
    report
}

#[derive(Debug, Error)]
pub enum DbError {
    #[error("reading commonsense rules: {0}")]
    Io(#[from] std::io::Error),
    #[error("commonsense rules are not a JSON map of pattern to constraint list: {0}")]
    Json(#[from] serde_json::Error),
    #[error("empty pattern in commonsense rules")]
    EmptyPattern,
    #[error("rule for {pattern:?}: {source}")]
    Constraint { pattern: String, source: ParseError },
    #[error("rule for {pattern:?} is an ordering constraint, only durations and times are allowed")]
    OrderingRule { pattern: String },
}

/// Curated expectations on event durations and times, keyed by a name
/// pattern.
///
/// A pattern applies to an entry when its words appear consecutively in
/// the entry's name, case-insensitively. When several patterns apply only
/// the longest is used, so "movie night" shadows "movie".
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommonsenseDb {
    rules: BTreeMap<String, Vec<Constraint>>,
}

static BUNDLED: LazyLock<CommonsenseDb> = LazyLock::new(|| {
    CommonsenseDb::from_json(include_str!("../data/commonsense.json")).expect("bundled rules parse")
});

fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric() && c != '-')
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Whether the words of `pattern` appear consecutively in `name`.
pub(crate) fn contains_words(name: &str, pattern: &str) -> bool {
    let p = words(pattern);
    !p.is_empty() && words(name).windows(p.len()).any(|w| w == p.as_slice())
}

impl CommonsenseDb {
    /// The rules shipped with the crate.
    pub fn bundled() -> &'static CommonsenseDb {
        &BUNDLED
    }

    pub fn from_json(text: &str) -> Result<Self, DbError> {
        let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(text)?;
        let mut rules = BTreeMap::new();
        for (pattern, lines) in raw {
            let pattern = name_key(&pattern);
            if pattern.is_empty() {
                return Err(DbError::EmptyPattern);
            }
            let mut cs = Vec::new();
            for line in lines {
                let c = crate::model::parse_constraint(&line).map_err(|source| DbError::Constraint {
                    pattern: pattern.clone(),
                    source,
                })?;
                if c.kind() == ConstraintKind::Relative {
                    return Err(DbError::OrderingRule { pattern });
                }
                cs.push(c);
            }
            rules.insert(pattern, cs);
        }
        Ok(CommonsenseDb { rules })
    }

    pub fn load(path: &Path) -> Result<Self, DbError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn patterns(&self) -> impl Iterator<Item = &str> {
        self.rules.keys().map(String::as_str)
    }

    /// The longest pattern that applies to `name`, with its rules.
    pub fn lookup(&self, name: &str) -> Option<(&str, &[Constraint])> {
        self.rules
            .iter()
            .filter(|(pattern, _)| contains_words(name, pattern))
            .max_by_key(|(pattern, _)| (pattern.len(), std::cmp::Reverse(pattern.as_str())))
            .map(|(p, cs)| (p.as_str(), cs.as_slice()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommonsenseViolation {
    pub event: String,
    pub pattern: String,
    pub rule: Constraint,
    pub observed: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CommonsenseReport {
    /// Percentage of applicable duration rules violated.
    pub duration: Option<f64>,
    /// Percentage of applicable start/end rules violated.
    pub start_end: Option<f64>,
    pub applicable_duration: usize,
    pub applicable_start_end: usize,
    pub violations: Vec<CommonsenseViolation>,
}

/// Tests every plan entry against the rules of its pattern.
pub fn check_commonsense(plan: &Plan, db: &CommonsenseDb) -> CommonsenseReport {
    let mut report = CommonsenseReport::default();
    let (mut bad_duration, mut bad_start_end) = (0, 0);
    for entry in plan {
        let Some((pattern, rules)) = db.lookup(&entry.event) else {
            continue;
        };
        for rule in rules {
            let (ok, observed) = evaluate(rule, entry, None);
            let duration = rule.kind() == ConstraintKind::Duration;
            if duration {
                report.applicable_duration += 1;
            } else {
                report.applicable_start_end += 1;
            }
            if !ok {
                if duration {
                    bad_duration += 1;
                } else {
                    bad_start_end += 1;
                }
                report.violations.push(CommonsenseViolation {
                    event: entry.event.clone(),
                    pattern: pattern.to_string(),
                    rule: rule.clone(),
                    observed: observed.unwrap_or_default(),
                });
            }
        }
    }
    report.duration = percent(bad_duration, report.applicable_duration);
    report.start_end = percent(bad_start_end, report.applicable_start_end);
    report
}

/// One feedback sentence per violation: missing events, then overlaps,
/// then unsatisfied constraints, each group sorted by event name.
pub fn verbalize_violations(v: &ViolationReport) -> Vec<String> {
    let mut missing: Vec<&String> = v.missing_events.iter().collect();
    missing.sort_by_key(|n| name_key(n));
    let mut overlaps: Vec<&(String, String)> = v.overlaps.iter().collect();
    overlaps.sort_by_key(|(a, b)| (name_key(a), name_key(b)));
    let mut unsatisfied: Vec<&Unsatisfied> = v.unsatisfied.iter().collect();
    unsatisfied.sort_by_key(|u| name_key(&u.event));

    let mut out = Vec::with_capacity(v.count());
    out.extend(missing.into_iter().map(|n| format!("{n} is missing from the plan")));
    out.extend(
        overlaps
            .into_iter()
            .map(|(a, b)| format!("{a} should not overlap with {b}")),
    );
    out.extend(unsatisfied.into_iter().map(|u| match &u.constraint {
        Constraint::MaxDuration(_) => format!("the duration of {} is too long", u.event),
        Constraint::MinDuration(_) => format!("the duration of {} is too short", u.event),
        c => format!("{} should {}", u.event, c.verb_phrase()),
    }));
    out
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::model::TimePoint;
    use proptest::prelude::*;

    fn case() -> impl Strategy<Value = (PlanRequest, Plan)> {
        let names = ["a", "b", "c", "d", "e"];
        (
            proptest::collection::vec((0usize..5, 0u32..20, 1u32..5), 0..6),
            proptest::collection::vec(proptest::collection::vec(0usize..6, 0..3), 5),
        )
            .prop_map(move |(slots, clause_ix)| {
                let clauses = ["starts after 3:00", "<2 hours", ">1 hour", "before e", "after a", "ends before 10:00"];
                let events = names
                    .iter()
                    .zip(&clause_ix)
                    .map(|(n, cs)| {
                        let cs = cs
                            .iter()
                            .map(|&i| clauses[i].parse::<Constraint>().unwrap())
                            .filter(|c| c.target() != Some(n))
                            .collect();
                        crate::model::EventSpec::new(n, cs)
                    })
                    .collect();
                let mut seen = BTreeSet::new();
                let entries = slots
                    .into_iter()
                    .filter(|(e, _, _)| seen.insert(*e))
                    .map(|(e, s, d)| {
                        PlanEntry::new(
                            names[e],
                            TimePoint::new(s * 30).unwrap(),
                            TimePoint::new(s * 30 + d * 30).unwrap(),
                        )
                        .unwrap()
                    })
                    .collect();
                (PlanRequest::new(events), Plan::new(entries))
            })
    }

    fn doubled(req: &PlanRequest, plan: &Plan) -> (PlanRequest, Plan) {
        let mut events = req.events.clone();
        for e in &req.events {
            let rename = |n: &str| format!("{n} 2");
            let cs = e
                .constraints
                .iter()
                .map(|c| match c {
                    Constraint::BeforeEvent(t) => Constraint::BeforeEvent(rename(t)),
                    Constraint::AfterEvent(t) => Constraint::AfterEvent(rename(t)),
                    c => c.clone(),
                })
                .collect();
            events.push(crate::model::EventSpec::new(&rename(&e.name), cs));
        }
        let mut entries = plan.entries().to_vec();
        entries.extend(plan.iter().map(|e| PlanEntry {
            event: format!("{} 2", e.event),
            ..e.clone()
        }));
        (PlanRequest::new(events), Plan::new(entries))
    }

    proptest! {
        #[test]
        fn coverage_and_missing_sum_to_100((req, plan) in case()) {
            let m = compute_metrics(&req, &plan);
            let v = check_plan(&req, &plan);
            let missing = v.missing_events.len() as f64 * 100.0 / req.events.len() as f64;
            prop_assert!((m.co.unwrap() + missing - 100.0).abs() < 1e-9);
        }

        #[test]
        fn metrics_in_range((req, plan) in case()) {
            let m = compute_metrics(&req, &plan);
            for v in [m.co, m.no, m.dc, m.oc, m.sec, m.avg_correctness].into_iter().flatten() {
                prop_assert!((0.0..=100.0).contains(&v));
            }
        }

        #[test]
        fn feedback_length_matches_count((req, plan) in case()) {
            let v = check_plan(&req, &plan);
            prop_assert_eq!(verbalize_violations(&v).len(), v.count());
        }

        #[test]
        fn scale_free((req, plan) in case()) {
            let (req2, plan2) = doubled(&req, &plan);
            let (a, b) = (compute_metrics(&req, &plan), compute_metrics(&req2, &plan2));
            let close = |x: Option<f64>, y: Option<f64>| match (x, y) {
                (Some(x), Some(y)) => (x - y).abs() < 1e-9,
                (None, None) => true,
                _ => false,
            };
            prop_assert!(close(a.co, b.co));
            prop_assert!(close(a.dc, b.dc));
            prop_assert!(close(a.oc, b.oc));
            prop_assert!(close(a.sec, b.sec));
        }
    }
}
