// Fills in unstated timing with an oracle before planning. The bundled
// lookup oracle stands in for a language model.
//
// cargo run -p dayplan --example commonsense_inference

use dayplan::model::PlanRequest;
use dayplan::reflect::{oracle_prompt, plan_with_commonsense, LookupOracle};
use dayplan::scheduler::plan;
use dayplan::stn::SolverConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let req = PlanRequest::from_lines(
        "write my paper: >2 hours\n\
         dinner: >45 minutes\n\
         standup: starts at 9:00, ends at 9:15",
    )?;
    let cfg = SolverConfig::default();

    println!("prompt sent for `write my paper`:\n{}\n", oracle_prompt("write my paper"));

    let (plus, inference) = plan_with_commonsense(&req, LookupOracle::bundled(), &cfg)?;
    for s in &inference.accepted {
        println!("accepted  {}: {}", s.event, s.constraint);
    }
    for s in &inference.rejected {
        println!("rejected  {}: {}", s.event, s.constraint);
    }
    println!("not asked {:?}\n", inference.skipped);

    println!("without inference:\n{}", plan(&req, &cfg)?.plan.to_table());
    println!("with inference:\n{}", plus.plan.to_table());
    Ok(())
}
