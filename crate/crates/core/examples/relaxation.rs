// Loosens conflicting constraints by `delta_t` per attempt, dropping
// those that still conflict after `k` attempts.
//
// cargo run -p dayplan --example relaxation

use dayplan::model::PlanRequest;
use dayplan::stn::{relax_and_bound, SolverConfig};

fn show(lines: &str, cfg: &SolverConfig) -> Result<(), Box<dyn std::error::Error>> {
    let req = PlanRequest::from_lines(lines)?;
    let (_, _, report) = relax_and_bound(&req, cfg)?;
    println!("{}", lines.trim());
    if report.is_empty() {
        println!("  consistent as given");
    }
    for line in report.summary(&req) {
        println!("  {line}");
    }
    println!();
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SolverConfig::default();
    println!("k = {}, delta_t = {} min\n", cfg.k, cfg.delta_t);

    // 45 minutes short: three steps of 15.
    show("call: starts at 9:00, ends at 10:00\nreview: after call, ends before 10:45, >90 minutes", &cfg)?;
    // 300 minutes short: more than k * delta_t, so the edge goes.
    show("early: ends before 8:00, >60 minutes\nlate: before early, starts after 12:00", &cfg)?;
    show("lunch: starts after 12:00, <1 hour\ndinner: after lunch", &cfg)?;
    Ok(())
}
