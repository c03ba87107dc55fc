// Runs the generate/check/feedback loop with a scripted generator whose
// plans fix one mistake per round, then with the symbolic planner.
//
// cargo run -p dayplan --example self_reflection

use dayplan::model::{Plan, PlanEntry, PlanRequest, TimePoint};
use dayplan::reflect::{reflect_loop, ScriptedGenerator, SymbolicGenerator};
use dayplan::stn::SolverConfig;

fn plan(entries: &[(&str, u32, u32)]) -> Plan {
    Plan::new(
        entries
            .iter()
            .map(|&(n, s, e)| PlanEntry::new(n, TimePoint::new(s).unwrap(), TimePoint::new(e).unwrap()).unwrap())
            .collect(),
    )
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let req = PlanRequest::from_lines("a: starts after 9:00\nb: after a\nc: <30 minutes")?;
    let cfg = SolverConfig::default();

    let scripted = ScriptedGenerator {
        plans: vec![
            plan(&[("a", 480, 540), ("b", 500, 560), ("c", 600, 660)]),
            plan(&[("a", 540, 600), ("b", 500, 560), ("c", 600, 660)]),
            plan(&[("a", 540, 600), ("b", 600, 660), ("c", 600, 660)]),
            plan(&[("a", 540, 600), ("b", 600, 660), ("c", 660, 680)]),
        ],
    };
    let (best, trace) = reflect_loop(&req, &scripted, &cfg)?;
    for (i, it) in trace.iterations.iter().enumerate() {
        println!("round {i}: {} violation(s)", it.violations.count());
        for f in &it.feedback {
            println!("    {f}");
        }
    }
    println!("selected round {}\n{}", trace.selected_index, best.to_table());

    let (best, trace) = reflect_loop(&req, &SymbolicGenerator { cfg: cfg.clone() }, &cfg)?;
    println!("symbolic planner: {} round(s)\n{}", trace.iterations.len(), best.to_table());
    Ok(())
}
