//! Writes the benchmark generator specs used in the README walkthrough:
//! the 30-state corridor chain and a 12-line ladder grid.
//!
//! Usage: cargo run -p cascade-core --example write_benchmark_specs [DIR]

use std::fs::File;
use std::io::BufWriter;

use cascade_core::chain::{corridor_chain, write_chain};
use cascade_core::grid::{path_grid, write_grid};

fn main() -> cascade_core::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| ".".into());
    let dir = std::path::Path::new(&dir);
    std::fs::create_dir_all(dir)?;

    let chain = corridor_chain();
    write_chain(&chain, &mut BufWriter::new(File::create(dir.join("chain.json"))?))?;

    let spec: Vec<(f64, f64)> = (0..12)
        .map(|i| if i % 2 == 0 { (0.9, 1.0) } else { (0.5, 1.0) })
        .collect();
    let grid = path_grid(&spec, 1.0)?;
    write_grid(&grid, &mut BufWriter::new(File::create(dir.join("grid.jsonl"))?))?;

    println!(
        "wrote {} and {}",
        dir.join("chain.json").display(),
        dir.join("grid.jsonl").display()
    );
    Ok(())
}
