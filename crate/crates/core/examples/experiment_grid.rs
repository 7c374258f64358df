//! A small (strategy x fraction x seed) grid driven by a config string,
//! with per-run metrics, a summary and per-cell aggregates on disk.
//!
//! `cargo run --release --example experiment_grid -- [OUT_DIR]`

use std::path::{Path, PathBuf};

use selective_backprop::experiment::run_grid;
use selective_backprop::*;

const CONFIG: &str = "\
dataset.kind = blobs
dataset.n = 3000
model.hidden = 32
train.epochs = 10
strategy.kinds = random, loss_based, grad_match
grid.fractions = 0.1, 0.3
grid.seeds = 0, 1, 2
";

fn main() -> Result<()> {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("selbp_grid"), PathBuf::from);
    let spec = parse_config(CONFIG, Path::new("experiment_grid"))?;
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let rows = run_grid(&spec, &out, jobs)?;
    println!("{} runs; outputs in {}", rows.len(), out.display());
    print!("{}", std::fs::read_to_string(out.join("aggregate.csv"))?);
    Ok(())
}
