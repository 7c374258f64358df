use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use selective_backprop::data::{synthesize, write_labeled_csv, DatasetDescriptor};
use selective_backprop::experiment::{resolve_out_dir, run_grad_error, run_grid, selftest};
use selective_backprop::{load_config, ExperimentSpec, Result};

#[derive(Parser)]
#[command(version, about = "Minibatch subset selection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every (strategy, fraction, seed) cell of the grid.
    Train(RunArgs),
    /// Measure subset-gradient error against the full-dataset gradient.
    GradError(RunArgs),
    /// Run the built-in oracle checks.
    Selftest,
    /// Write a synthetic dataset as CSV.
    SynthData {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "data.csv")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Replace the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(args: &RunArgs) -> Result<ExperimentSpec> {
    let mut spec = load_config(&args.config)?;
    if let Some(s) = args.seed {
        spec.seeds = vec![s];
    }
    Ok(spec)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train(args) => {
            let spec = load(&args)?;
            let out = resolve_out_dir(args.out.clone(), &spec);
            let rows = run_grid(&spec, &out, args.jobs)?;
            println!("{} runs written to {}", rows.len(), out.display());
            Ok(true)
        }
        Command::GradError(args) => {
            let spec = load(&args)?;
            let out = resolve_out_dir(args.out.clone(), &spec);
            for (seed, samples) in run_grad_error(&spec, &out)? {
                for (name, med) in selective_backprop::evalgrad::median_errors(&samples) {
                    println!("seed {seed} {name}: median squared error {med:.4e}");
                }
            }
            Ok(true)
        }
        Command::Selftest => {
            let checks = selftest();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
        Command::SynthData { config, out, seed } => {
            let mut desc = match config {
                Some(p) => load_config(&p)?.dataset,
                None => DatasetDescriptor::default(),
            };
            if let Some(s) = seed {
                desc.seed = s;
            }
            desc.validate()?;
            let split = synthesize(&desc)?;
            write_labeled_csv(&split, &out)?;
            println!("{} rows written to {}", split.len(), out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
