// Scores a hand-written plan against its request: violations, the
// correctness columns, commonsense checks, and feedback sentences.
//
// cargo run -p dayplan --example validate_plan

use dayplan::model::{Plan, PlanEntry, PlanRequest, TimePoint};
use dayplan::validator::{check_commonsense, check_plan, compute_metrics, verbalize_violations, CommonsenseDb, MetricsReport};

fn entry(name: &str, start: &str, end: &str) -> PlanEntry {
    PlanEntry::new(name, start.parse::<TimePoint>().unwrap(), end.parse::<TimePoint>().unwrap()).unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let req = PlanRequest::from_lines(
        "breakfast: >20 minutes\n\
         emails: after breakfast, <45 minutes\n\
         movie night: starts after 19:00\n\
         laundry: >30 minutes",
    )?;
    let plan = Plan::new(vec![
        entry("breakfast", "13:00", "13:30"),
        entry("emails", "12:30", "13:15"),
        entry("movie night", "20:00", "20:45"),
    ]);

    let violations = check_plan(&req, &plan);
    for line in verbalize_violations(&violations) {
        println!("- {line}");
    }

    let commonsense = check_commonsense(&plan, CommonsenseDb::bundled());
    for v in &commonsense.violations {
        println!("commonsense: {} breaks `{}` ({})", v.event, v.rule, v.pattern);
    }

    let metrics = compute_metrics(&req, &plan).with_commonsense(&commonsense);
    println!("\n{}\n{}", MetricsReport::header(), metrics.row());
    println!("{}", serde_json::to_string(&metrics)?);
    Ok(())
}
