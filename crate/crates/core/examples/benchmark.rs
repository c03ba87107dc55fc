// Scores the symbolic planner with and without commonsense inference on
// generated personas.
//
// cargo run -p dayplan --example benchmark --release -- [count]

use std::sync::Arc;

use dayplan::bench::{run_benchmark, Planner};
use dayplan::datagen::generate_personas;
use dayplan::reflect::LookupOracle;
use dayplan::stn::SolverConfig;
use dayplan::validator::CommonsenseDb;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20);
    let personas = generate_personas(42, n)?;
    let db = CommonsenseDb::bundled();
    let cfg = SolverConfig::default();

    let mut report = run_benchmark(&personas, &Planner::SymPlan, db, &cfg);
    let oracle = Arc::new(LookupOracle::bundled().clone());
    report.merge(run_benchmark(&personas, &Planner::SymPlanPlus(oracle), db, &cfg));

    print!("{}", report.to_table());
    for row in &report.rows {
        println!(
            "{}: post-relaxation satisfaction {:.2}",
            row.planner,
            row.post_relaxation.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
