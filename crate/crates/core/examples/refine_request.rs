// Turns short refinement utterances into constraint edits and re-plans.
//
// cargo run -p dayplan --example refine_request

use dayplan::model::PlanRequest;
use dayplan::reflect::extract_constraints;
use dayplan::scheduler::plan;
use dayplan::stn::SolverConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut req = PlanRequest::from_lines("lunch: <1 hour\ngym: >45 minutes\nemails: <30 minutes")?;
    let cfg = SolverConfig::default();

    for utterance in [
        "lunch should start at noon and be at least 30 minutes",
        "move gym to the afternoon",
        "add groceries",
        "emails should be before lunch",
        "I want frequent breaks in the afternoon",
    ] {
        println!("> {utterance}");
        match extract_constraints(utterance) {
            Ok(x) => {
                req = x.apply(&req)?;
                print!("{}", req.to_lines());
            }
            Err(e) => println!("  {e}"),
        }
    }
    println!("\n{}", plan(&req, &cfg)?.plan.to_table());
    Ok(())
}
