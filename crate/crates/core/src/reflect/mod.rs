//! Self-reflection over a plan generator, commonsense inference for the
//! symbolic planner, and the refinement-utterance extractor.

mod extract;
#[cfg(feature = "remote")]
pub mod remote;

use std::collections::HashMap;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_constraints, ApplyError, ConstraintUpdate, Extraction, NotExtractable};

use crate::model::{
    name_key, parse_constraint, Constraint, ConstraintKind, Plan, PlanEntry, PlanRequest, RequestError,
    TimePoint,
};
use crate::scheduler::{self, ScheduleResult};
use crate::stn::{relax_and_bound, try_insert_constraint, ConfigError, EdgeOrigin, SolverConfig};
use crate::validator::{check_plan, contains_words, verbalize_violations, ViolationReport};

/// A plan shown to the generator together with the feedback it earned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub plan: Plan,
    pub feedback: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("plan generator failed: {0}")]
pub struct GeneratorError(pub String);

/// Anything that turns a request into a plan, optionally using feedback on
/// its earlier attempts.
pub trait PlanGenerator: Send + Sync {
    fn generate(&self, req: &PlanRequest, history: &[Attempt]) -> Result<Plan, GeneratorError>;
}

/// The symbolic planner as a generator. It ignores feedback.
#[derive(Debug, Clone, Default)]
pub struct SymbolicGenerator {
    pub cfg: SolverConfig,
}

impl PlanGenerator for SymbolicGenerator {
    fn generate(&self, req: &PlanRequest, _history: &[Attempt]) -> Result<Plan, GeneratorError> {
        scheduler::plan(req, &self.cfg)
            .map(|r| r.plan)
            .map_err(|e| GeneratorError(e.to_string()))
    }
}

/// Replays fixed plans, one per call; the last one repeats.
#[derive(Debug, Clone)]
pub struct ScriptedGenerator {
    pub plans: Vec<Plan>,
}

impl PlanGenerator for ScriptedGenerator {
    fn generate(&self, _req: &PlanRequest, history: &[Attempt]) -> Result<Plan, GeneratorError> {
        let i = history.len().min(self.plans.len().saturating_sub(1));
        self.plans
            .get(i)
            .cloned()
            .ok_or_else(|| GeneratorError("script is empty".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Iteration {
    pub plan: Plan,
    pub violations: ViolationReport,
    pub feedback: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionTrace {
    pub iterations: Vec<Iteration>,
    /// First iteration with the fewest violations.
    pub selected_index: usize,
}

impl ReflectionTrace {
    pub fn selected(&self) -> Option<&Iteration> {
        self.iterations.get(self.selected_index)
    }

    fn push(&mut self, it: Iteration) {
        let count = it.violations.count();
        self.iterations.push(it);
        let best = self.iterations[self.selected_index].violations.count();
        if count < best {
            self.selected_index = self.iterations.len() - 1;
        }
    }
}

#[derive(Debug, Error)]
pub enum ReflectError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// The generator failed; everything up to the failure is kept.
    #[error("{source} after {} iteration(s)", trace.iterations.len())]
    GeneratorFailure {
        source: GeneratorError,
        trace: ReflectionTrace,
    },
}

impl ReflectError {
    /// The best plan produced before the failure, if any.
    pub fn best_plan(&self) -> Option<&Plan> {
        match self {
            ReflectError::GeneratorFailure { trace, .. } => trace.selected().map(|it| &it.plan),
            ReflectError::Config(_) => None,
        }
    }
}

/// Generates, checks and regenerates with verbalized feedback until a plan
/// has no violations or `max_reflect_iters` feedback rounds have been
/// spent, so at most `1 + max_reflect_iters` plans are generated. Returns
/// the plan with the fewest violations, the earliest on ties.
pub fn reflect_loop(
    req: &PlanRequest,
    generator: &dyn PlanGenerator,
    cfg: &SolverConfig,
) -> Result<(Plan, ReflectionTrace), ReflectError> {
    cfg.validate()?;
    if cfg.max_reflect_iters < 1 {
        return Err(ConfigError("max_reflect_iters must be at least 1").into());
    }
    let mut trace = ReflectionTrace::default();
    let mut history: Vec<Attempt> = Vec::new();
    for round in 0..=cfg.max_reflect_iters {
        let plan = match generator.generate(req, &history) {
            Ok(plan) => plan,
            Err(source) => return Err(ReflectError::GeneratorFailure { source, trace }),
        };
        let violations = check_plan(req, &plan);
        let feedback = verbalize_violations(&violations);
        let done = violations.is_empty();
        trace.push(Iteration {
            plan: plan.clone(),
            violations,
            feedback: feedback.clone(),
        });
        if done || round == cfg.max_reflect_iters {
            break;
        }
        history.push(Attempt { plan, feedback });
    }
    let plan = trace.selected().expect("at least one iteration").plan.clone();
    Ok((plan, trace))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("commonsense oracle failed: {0}")]
pub struct OracleError(pub String);

/// Suggests typical start and end times for an event.
pub trait CommonsenseOracle: Send + Sync {
    fn suggest(&self, event: &str) -> Result<Vec<Constraint>, OracleError>;
}

/// The few-shot prompt asking for an event's typical start and end times.
pub fn oracle_prompt(event: &str) -> String {
    const SHOTS: [(&str, &str); 3] = [
        ("dinner", "dinner: starts after 18:00, ends before 22:00"),
        ("wake up", "wake up: starts after 7:00"),
        ("company meeting", "company meeting: starts after 10:00, ends before 17:00"),
    ];
    let ask = "Can you suggest typical start and end time constraints during a day for the following event:";
    let mut out = String::new();
    for (name, answer) in SHOTS {
        out.push_str(&format!("{ask}\n{name}\n\nConstraints:\n{answer}\n\n"));
    }
    out.push_str(&format!("{ask}\n{event}\n\nConstraints:"));
    out
}

/// Reads a `name: clause, clause` reply. Clauses that are not start/end
/// times or fail to parse are skipped; a reply with no usable line yields
/// nothing.
pub fn parse_oracle_response(event: &str, text: &str) -> Vec<Constraint> {
    let key = name_key(event);
    let lines: Vec<&str> = text.lines().filter(|l| l.contains(':')).collect();
    let line = lines
        .iter()
        .find(|l| l.split_once(':').is_some_and(|(n, _)| name_key(n) == key))
        .or(lines.first());
    let Some((_, clauses)) = line.and_then(|l| l.split_once(':')) else {
        return Vec::new();
    };
    clauses
        .split(',')
        .filter_map(|c| parse_constraint(c).ok())
        .filter(|c| c.kind() == ConstraintKind::Absolute)
        .collect()
}

/// An oracle answering from a table of `name: constraints` lines.
///
/// A query is answered by the entry with the same name, or else by the
/// longest entry whose words appear in the query.
#[derive(Debug, Clone, Default)]
pub struct LookupOracle {
    table: HashMap<String, Vec<Constraint>>,
}

static BUNDLED_LOOKUP: LazyLock<LookupOracle> =
    LazyLock::new(|| LookupOracle::from_lines(include_str!("../../data/oracle_lookup.txt")));

impl LookupOracle {
    /// The table shipped with the crate.
    pub fn bundled() -> &'static LookupOracle {
        &BUNDLED_LOOKUP
    }

    /// Parses one answer per line; blank lines and `#` comments are skipped.
    pub fn from_lines(text: &str) -> Self {
        let table = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .filter_map(|l| {
                let (name, _) = l.split_once(':')?;
                Some((name_key(name), parse_oracle_response(name, l)))
            })
            .collect();
        LookupOracle { table }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl CommonsenseOracle for LookupOracle {
    fn suggest(&self, event: &str) -> Result<Vec<Constraint>, OracleError> {
        let key = name_key(event);
        if let Some(cs) = self.table.get(&key) {
            return Ok(cs.clone());
        }
        Ok(self
            .table
            .iter()
            .filter(|(pattern, _)| contains_words(&key, pattern))
            .max_by_key(|(pattern, _)| (pattern.len(), std::cmp::Reverse(pattern.as_str())))
            .map(|(_, cs)| cs.clone())
            .unwrap_or_default())
    }
}

/// Both endpoints are pinned by the user's own constraints.
pub fn completely_specified(constraints: &[Constraint]) -> bool {
    let has = |f: fn(&Constraint) -> bool| constraints.iter().any(f);
    let starts_at = has(|c| matches!(c, Constraint::StartsAt(_)));
    let ends_at = has(|c| matches!(c, Constraint::EndsAt(_)));
    let min = constraints.iter().find_map(|c| match c {
        Constraint::MinDuration(d) => Some(*d),
        _ => None,
    });
    let max = constraints.iter().find_map(|c| match c {
        Constraint::MaxDuration(d) => Some(*d),
        _ => None,
    });
    starts_at && (ends_at || (min.is_some() && min == max))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub event: String,
    pub constraint: Constraint,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inference {
    /// The input with accepted suggestions in each event's inferred list.
    pub request: PlanRequest,
    pub accepted: Vec<Suggestion>,
    /// Suggestions that would contradict the user's constraints.
    pub rejected: Vec<Suggestion>,
    /// Events never queried because their timing is fixed.
    pub skipped: Vec<String>,
    /// Events whose query failed, with the error text.
    pub failures: Vec<(String, String)>,
}

/// Queries `oracle` for every event whose timing is not completely
/// specified and keeps each suggestion that is consistent with the user's
/// (relaxed) constraints and the suggestions accepted before it.
pub fn infer_commonsense(
    req: &PlanRequest,
    oracle: &dyn CommonsenseOracle,
    cfg: &SolverConfig,
) -> Result<Inference, RequestError> {
    let (mut graph, mut bounds, _) = relax_and_bound(req, cfg)?;
    let mut out = Inference {
        request: req.clone(),
        ..Inference::default()
    };
    for (i, event) in req.events.iter().enumerate() {
        if completely_specified(&event.constraints) {
            out.skipped.push(event.name.clone());
            continue;
        }
        let suggestions = match oracle.suggest(&event.name) {
            Ok(s) => s,
            Err(e) => {
                out.failures.push((event.name.clone(), e.0));
                continue;
            }
        };
        for c in suggestions {
            if c.kind() != ConstraintKind::Absolute {
                continue;
            }
            let target = &mut out.request.events[i];
            let origin = EdgeOrigin::Inferred {
                event: i,
                index: target.inferred.len(),
            };
            let suggestion = Suggestion {
                event: event.name.clone(),
                constraint: c.clone(),
            };
            if try_insert_constraint(req, &mut graph, &mut bounds, i, &c, origin)? {
                target.inferred.push(c);
                out.accepted.push(suggestion);
            } else {
                out.rejected.push(suggestion);
            }
        }
    }
    Ok(out)
}

/// Commonsense inference followed by planning.
pub fn plan_with_commonsense(
    req: &PlanRequest,
    oracle: &dyn CommonsenseOracle,
    cfg: &SolverConfig,
) -> Result<(ScheduleResult, Inference), RequestError> {
    let inference = infer_commonsense(req, oracle, cfg)?;
    let result = scheduler::plan(&inference.request, cfg)?;
    Ok((result, inference))
}

/// The message sent to a language-model generator: the task, the event
/// block, and feedback on every earlier attempt.
pub fn generator_prompt(req: &PlanRequest, history: &[Attempt]) -> String {
    let mut out = String::from(
        "Create a plan for the day that includes every event below and satisfies all of its \
         constraints. Events must not overlap. Answer with one line per event in the form \
         \"HH:MM - HH:MM  event\".\n\nEvents:\n",
    );
    out.push_str(&req.to_lines());
    for (i, attempt) in history.iter().enumerate() {
        out.push_str(&format!("\nPlan {}:\n{}", i + 1, attempt.plan.to_table()));
        out.push_str("Violations:\n");
        for line in &attempt.feedback {
            out.push_str(&format!("- {line}\n"));
        }
    }
    if !history.is_empty() {
        out.push_str("\nFix the violations above and give the full revised plan.\n");
    }
    out
}

/// Reads `HH:MM - HH:MM  event` lines out of free text; other lines and
/// empty intervals are ignored.
pub fn parse_plan_text(text: &str) -> Plan {
    static LINE: LazyLock<regex::Regex> = LazyLock::new(|| {
        regex::Regex::new(r"(\d{1,2}:\d{2}\s*(?:[ap]\.?m\.?)?)\s*[-–]\s*(\d{1,2}:\d{2}\s*(?:[ap]\.?m\.?)?)\s*:?\s+(.+)$")
            .unwrap()
    });
    let entries = text
        .lines()
        .filter_map(|l| {
            let caps = LINE.captures(l.trim())?;
            let start: TimePoint = caps[1].parse().ok()?;
            let end: TimePoint = caps[2].parse().ok()?;
            let name = caps[3].trim().trim_start_matches(['-', '*', ' ']);
            PlanEntry::new(name, start, end).ok()
        })
        .collect();
    Plan::new(entries)
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::model::props::constraint;
    use crate::model::EventSpec;
    use proptest::prelude::*;

    fn request() -> impl Strategy<Value = PlanRequest> {
        proptest::collection::vec(proptest::collection::vec(constraint(), 0..3), 1..4).prop_map(|per| {
            let names = ["breakfast", "write my paper", "dinner"];
            let events = per
                .into_iter()
                .enumerate()
                .map(|(i, cs)| {
                    let cs = cs
                        .into_iter()
                        .filter(|c| c.target().is_none())
                        .collect();
                    EventSpec::new(names[i], cs)
                })
                .collect();
            PlanRequest::new(events)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn inference_keeps_user_constraints(req in request()) {
            let cfg = SolverConfig::default();
            let inf = infer_commonsense(&req, LookupOracle::bundled(), &cfg).unwrap();
            for (a, b) in req.events.iter().zip(&inf.request.events) {
                prop_assert_eq!(&a.constraints, &b.constraints);
            }
            let (_, _, raw) = relax_and_bound(&req, &cfg).unwrap();
            let (_, _, augmented) = relax_and_bound(&inf.request, &cfg).unwrap();
            let user = |o: &EdgeOrigin| matches!(o, EdgeOrigin::Constraint { .. });
            let raw_dropped: Vec<_> = raw.dropped.iter().filter(|e| user(&e.origin)).collect();
            let aug_dropped: Vec<_> = augmented.dropped.iter().filter(|e| user(&e.origin)).collect();
            prop_assert_eq!(raw_dropped, aug_dropped);
            let inferred_dropped = augmented
                .dropped
                .iter()
                .any(|e| matches!(e.origin, EdgeOrigin::Inferred { .. }));
            prop_assert!(!inferred_dropped);
        }
    }
}
