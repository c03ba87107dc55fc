// Generates seeded synthetic personas and writes them as JSON files.
//
// cargo run -p dayplan --example personas -- [seed] [count] [dir]

use std::path::PathBuf;

use dayplan::datagen::{generate_personas, write_personas};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(42);
    let n = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3);

    let personas = generate_personas(seed, n)?;
    for p in &personas {
        println!("{}", p.id);
        print!("{}", p.request.to_lines());
        println!();
    }
    if let Some(dir) = args.next() {
        let dir = PathBuf::from(dir);
        write_personas(&dir, &personas)?;
        println!("wrote {} files to {}", personas.len(), dir.display());
    }
    Ok(())
}
