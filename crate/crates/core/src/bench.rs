//! Runs a planner over a persona set and aggregates plan metrics into one
//! table row, keeping per-persona detail.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::Persona;
use crate::model::{ConstraintKind, Plan, PlanRequest};
use crate::reflect::{plan_with_commonsense, reflect_loop, CommonsenseOracle, PlanGenerator};
use crate::scheduler;
use crate::stn::{relax_and_bound, EdgeOrigin, SolverConfig};
use crate::validator::{
    check_commonsense, compute_metrics, constraint_tally, match_events, mean_defined, CommonsenseDb,
    MetricsReport,
};

/// A planner under evaluation.
#[derive(Clone)]
pub enum Planner {
    SymPlan,
    SymPlanPlus(Arc<dyn CommonsenseOracle>),
    Reflect { name: String, generator: Arc<dyn PlanGenerator> },
}

impl Planner {
    pub fn name(&self) -> &str {
        match self {
            Planner::SymPlan => "symplan",
            Planner::SymPlanPlus(_) => "symplan_plus",
            Planner::Reflect { name, .. } => name,
        }
    }

    fn run(&self, req: &PlanRequest, cfg: &SolverConfig) -> Result<Outcome, String> {
        match self {
            Planner::SymPlan => {
                let r = scheduler::plan(req, cfg).map_err(|e| e.to_string())?;
                Ok(Outcome {
                    search_exhausted: Some(r.search_exhausted),
                    relaxed: r.relaxation.relaxed.len(),
                    dropped: r.relaxation.dropped.len(),
                    plan: r.plan,
                })
            }
            Planner::SymPlanPlus(oracle) => {
                let (r, _) = plan_with_commonsense(req, oracle.as_ref(), cfg).map_err(|e| e.to_string())?;
                Ok(Outcome {
                    search_exhausted: Some(r.search_exhausted),
                    relaxed: r.relaxation.relaxed.len(),
                    dropped: r.relaxation.dropped.len(),
                    plan: r.plan,
                })
            }
            Planner::Reflect { generator, .. } => {
                let (plan, _) = reflect_loop(req, generator.as_ref(), cfg).map_err(|e| e.to_string())?;
                Ok(Outcome {
                    plan,
                    search_exhausted: None,
                    relaxed: 0,
                    dropped: 0,
                })
            }
        }
    }
}

impl fmt::Debug for Planner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

struct Outcome {
    plan: Plan,
    search_exhausted: Option<bool>,
    relaxed: usize,
    dropped: usize,
}

/// Satisfied and total constraints of one kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Count {
    pub satisfied: usize,
    pub total: usize,
}

impl Count {
    fn add(&mut self, other: Count) {
        self.satisfied += other.satisfied;
        self.total += other.total;
    }

    pub fn percent(&self) -> Option<f64> {
        (self.total > 0).then(|| self.satisfied as f64 * 100.0 / self.total as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PersonaRecord {
    pub id: String,
    /// Set when planning failed; the persona is left out of the means.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Plan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_exhausted: Option<bool>,
    pub relaxed_edges: usize,
    pub dropped_edges: usize,
    /// User-constraint edges of the relaxed network that the plan keeps,
    /// over those whose events are all planned.
    pub post_relaxation: Count,
    pub duration: Count,
    pub order: Count,
    pub start_end: Count,
    pub millis: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub planner: String,
    pub personas: usize,
    pub failures: usize,
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
    pub avg: Option<f64>,
    pub duration: Option<f64>,
    pub start_end: Option<f64>,
    pub commonsense_avg: Option<f64>,
    /// Mean over personas of the post-relaxation satisfaction percentage.
    pub post_relaxation: Option<f64>,
    /// Constraint percentages pooled over all personas.
    pub pooled_dc: Option<f64>,
    pub pooled_oc: Option<f64>,
    pub pooled_sec: Option<f64>,
    pub pooled_post_relaxation: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub details: Vec<PersonaRecord>,
}

/// Percentage of the user-constraint edges in `req`'s relaxed network that
/// `plan` keeps. Edges touching an unplanned event are not counted.
pub fn post_relaxation_count(req: &PlanRequest, plan: &Plan, cfg: &SolverConfig) -> Count {
    let Ok((graph, _, _)) = relax_and_bound(req, cfg) else {
        return Count::default();
    };
    let matched = match_events(req, plan);
    let mut times = vec![None; graph.node_count()];
    times[graph.datum().0] = Some(0);
    for (i, m) in matched.iter().enumerate() {
        if let Some(j) = m {
            let entry = &plan.entries()[*j];
            let nodes = graph.event(i);
            times[nodes.start.0] = Some(i64::from(entry.start.minutes()));
            times[nodes.end.0] = Some(i64::from(entry.end.minutes()));
        }
    }
    let mut count = Count::default();
    for edge in graph.edges() {
        if !matches!(edge.origin, EdgeOrigin::Constraint { .. }) {
            continue;
        }
        if let (Some(a), Some(b)) = (times[edge.from.0], times[edge.to.0]) {
            count.total += 1;
            if b - a <= edge.weight {
                count.satisfied += 1;
            }
        }
    }
    count
}

fn evaluate(persona: &Persona, planner: &Planner, db: &CommonsenseDb, cfg: &SolverConfig) -> PersonaRecord {
    let started = Instant::now();
    let req = &persona.request;
    let mut record = PersonaRecord {
        id: persona.id.clone(),
        ..PersonaRecord::default()
    };
    match planner.run(req, cfg) {
        Err(e) => record.error = Some(e),
        Ok(out) => {
            let cs = check_commonsense(&out.plan, db);
            record.metrics = Some(compute_metrics(req, &out.plan).with_commonsense(&cs));
            let tally: HashMap<_, _> = constraint_tally(req, &out.plan);
            let count = |k| {
                tally
                    .get(&k)
                    .map_or(Count::default(), |&(satisfied, total)| Count { satisfied, total })
            };
            record.duration = count(ConstraintKind::Duration);
            record.order = count(ConstraintKind::Relative);
            record.start_end = count(ConstraintKind::Absolute);
            record.post_relaxation = post_relaxation_count(req, &out.plan, cfg);
            record.search_exhausted = out.search_exhausted;
            record.relaxed_edges = out.relaxed;
            record.dropped_edges = out.dropped;
            record.plan = Some(out.plan);
        }
    }
    record.millis = started.elapsed().as_millis() as u64;
    record
}

fn aggregate(planner: &str, details: &[PersonaRecord]) -> BenchmarkRow {
    let ok: Vec<&PersonaRecord> = details.iter().filter(|d| d.error.is_none()).collect();
    let metrics: Vec<&MetricsReport> = ok.iter().filter_map(|d| d.metrics.as_ref()).collect();
    let col = |f: fn(&MetricsReport) -> Option<f64>| mean_defined(metrics.iter().map(|m| f(m)));
    let pooled = |f: fn(&PersonaRecord) -> Count| {
        let mut c = Count::default();
        for d in &ok {
            c.add(f(d));
        }
        c.percent()
    };
    BenchmarkRow {
        planner: planner.to_string(),
        personas: details.len(),
        failures: details.len() - ok.len(),
        co: col(|m| m.co),
        no: col(|m| m.no),
        dc: col(|m| m.dc),
        oc: col(|m| m.oc),
        sec: col(|m| m.sec),
        avg: col(|m| m.avg_correctness),
        duration: col(|m| m.cs_duration),
        start_end: col(|m| m.cs_start_end),
        commonsense_avg: col(|m| m.avg_commonsense()),
        post_relaxation: mean_defined(ok.iter().map(|d| d.post_relaxation.percent())),
        pooled_dc: pooled(|d| d.duration),
        pooled_oc: pooled(|d| d.order),
        pooled_sec: pooled(|d| d.start_end),
        pooled_post_relaxation: pooled(|d| d.post_relaxation),
    }
}

/// Plans every persona (in parallel), scores each plan, and averages the
/// per-persona metrics. Failed personas are recorded and counted but left
/// out of the means. An empty persona list gives an empty report.
pub fn run_benchmark(
    personas: &[Persona],
    planner: &Planner,
    db: &CommonsenseDb,
    cfg: &SolverConfig,
) -> BenchmarkReport {
    if personas.is_empty() {
        return BenchmarkReport::default();
    }
    let mut details: Vec<PersonaRecord> = personas
        .par_iter()
        .map(|p| evaluate(p, planner, db, cfg))
        .collect();
    details.sort_by(|a, b| a.id.cmp(&b.id));
    BenchmarkReport {
        rows: vec![aggregate(planner.name(), &details)],
        details,
    }
}

impl BenchmarkReport {
    /// Appends another report's rows and details.
    pub fn merge(&mut self, other: BenchmarkReport) {
        self.rows.extend(other.rows);
        self.details.extend(other.details);
    }

    /// Aligned columns: correctness (higher is better) then commonsense
    /// violation rates (lower is better).
    pub fn to_table(&self) -> String {
        let cells = [
            "CO", "NO", "DC", "OC", "SEC", "AVG", "dur", "st/end", "AVG", "failed",
        ];
        let width = self
            .rows
            .iter()
            .map(|r| r.planner.len())
            .max()
            .unwrap_or(0)
            .max("planner".len());
        let mut out = format!("{:<width$}", "planner");
        for c in cells {
            out.push_str(&format!(" {c:>7}"));
        }
        out.push('\n');
        let fmt = |v: Option<f64>| v.map_or_else(|| format!(" {:>7}", "-"), |v| format!(" {v:>7.2}"));
        for r in &self.rows {
            out.push_str(&format!("{:<width$}", r.planner));
            for v in [
                r.co,
                r.no,
                r.dc,
                r.oc,
                r.sec,
                r.avg,
                r.duration,
                r.start_end,
                r.commonsense_avg,
            ] {
                out.push_str(&fmt(v));
            }
            out.push_str(&format!(" {:>7}\n", r.failures));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::generate_personas;
    use crate::model::{Constraint, PlanEntry, TimePoint};
    use crate::reflect::{GeneratorError, LookupOracle};

    /// Schedules every event back to back from 00:00 at its minimum
    /// duration, which satisfies requests built for it.
    struct Echo;

    impl PlanGenerator for Echo {
        fn generate(&self, req: &PlanRequest, _: &[crate::reflect::Attempt]) -> Result<Plan, GeneratorError> {
            let mut t = 0;
            let mut entries = Vec::new();
            for e in &req.events {
                let d = e
                    .constraints
                    .iter()
                    .find_map(|c| match c {
                        Constraint::MinDuration(d) => Some(d.minutes()),
                        _ => None,
                    })
                    .unwrap_or(30);
                entries.push(PlanEntry::new(&e.name, TimePoint::new(t).unwrap(), TimePoint::new(t + d).unwrap()).unwrap());
                t += d;
            }
            Ok(Plan::new(entries))
        }
    }

    fn echo_personas() -> Vec<Persona> {
        (0..5)
            .map(|i| {
                let req = PlanRequest::from_lines("a: >30 minutes\nb: after a, >20 minutes\nc: after b, starts after 0:30").unwrap();
                Persona {
                    id: format!("p{i}"),
                    request: req,
                }
            })
            .collect()
    }

    #[test]
    fn empty_input() {
        let r = run_benchmark(&[], &Planner::SymPlan, CommonsenseDb::bundled(), &SolverConfig::default());
        assert!(r.rows.is_empty() && r.details.is_empty());
    }

    #[test]
    fn perfect_echo_scores_100() {
        let planner = Planner::Reflect {
            name: "echo".into(),
            generator: Arc::new(Echo),
        };
        let r = run_benchmark(&echo_personas(), &planner, CommonsenseDb::bundled(), &SolverConfig::default());
        let row = &r.rows[0];
        for v in [row.co, row.no, row.dc, row.oc, row.sec, row.avg, row.post_relaxation] {
            assert_eq!(v, Some(100.0));
        }
        assert_eq!(row.failures, 0);
    }

    #[test]
    fn failures_are_counted() {
        struct Broken;
        impl PlanGenerator for Broken {
            fn generate(&self, _: &PlanRequest, _: &[crate::reflect::Attempt]) -> Result<Plan, GeneratorError> {
                Err(GeneratorError("offline".into()))
            }
        }
        let planner = Planner::Reflect {
            name: "broken".into(),
            generator: Arc::new(Broken),
        };
        let r = run_benchmark(&echo_personas(), &planner, CommonsenseDb::bundled(), &SolverConfig::default());
        assert_eq!(r.rows[0].failures, 5);
        assert_eq!(r.rows[0].co, None);
        assert!(r.details.iter().all(|d| d.error.is_some()));
    }

    #[test]
    fn symplan_rows_are_consistent() {
        let personas = generate_personas(3, 12).unwrap();
        let db = CommonsenseDb::bundled();
        let cfg = SolverConfig::default();
        let mut report = run_benchmark(&personas, &Planner::SymPlan, db, &cfg);
        report.merge(run_benchmark(
            &personas,
            &Planner::SymPlanPlus(Arc::new(LookupOracle::bundled().clone())),
            db,
            &cfg,
        ));
        for row in &report.rows {
            assert_eq!(row.no, Some(100.0));
            assert_eq!(row.post_relaxation, Some(100.0));
        }
        // Row means are recomputable from the details.
        let symplan: Vec<_> = report.details.iter().take(12).collect();
        let co = symplan.iter().map(|d| d.metrics.as_ref().unwrap().co.unwrap()).sum::<f64>() / 12.0;
        assert!((report.rows[0].co.unwrap() - co).abs() < 1e-9);
        let table = report.to_table();
        assert!(table.lines().next().unwrap().starts_with("planner"));
        assert_eq!(table.lines().count(), 3);
        let ids: Vec<_> = symplan.iter().map(|d| d.id.clone()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }
}
