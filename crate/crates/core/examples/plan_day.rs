// Plans a small day from constraint-language lines and prints the
// schedule with its makespan.
//
// cargo run -p dayplan --example plan_day

use dayplan::model::PlanRequest;
use dayplan::scheduler::plan;
use dayplan::stn::SolverConfig;

const DAY: &str = "
standup: starts at 9:30, ends at 9:45
write report: starts after 8:00, >90 minutes, <3 hours, before lunch
lunch: starts after 12:00, >30 minutes, <1 hour
gym: after lunch, >45 minutes
call mom: starts after 17:00, <30 minutes
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let req = PlanRequest::from_lines(DAY)?;
    let result = plan(&req, &SolverConfig::default())?;

    print!("{}", result.plan.to_table());
    println!("makespan {}", result.makespan);
    println!("complete {}, search exhausted {}", result.complete, result.search_exhausted);
    for line in result.relaxation.summary(&req) {
        println!("{line}");
    }
    Ok(())
}
