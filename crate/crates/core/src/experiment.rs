//! Experiment drivers behind the command line: the training grid, the
//! gradient-error histogram and the built-in oracle self-test.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::ExperimentSpec;
use crate::data::load_dataset;
use crate::error::{Error, Result};
use crate::evalgrad::{gradient_error_experiment, write_histogram_csv, GradErrorSample};
use crate::gram::{gram_explicit, gram_implicit, BatchTape};
use crate::linalg::DenseMatrix;
use crate::model::{Activation, Mlp};
use crate::omp::{omp_dense_oracle, omp_gram, OmpConfig};
use crate::selection::StrategyKind;
use crate::trainer::{init_model, train, write_metrics_csv, TrainConfig};

/// One row of `summary.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub strategy: String,
    pub fraction: f64,
    pub seed: u64,
    pub max_test_accuracy: f64,
    pub cost_units_total: f64,
}

/// Mean, min and max of the maximal test accuracy over seeds for one
/// (strategy, fraction) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellAggregate {
    pub strategy: String,
    pub fraction: f64,
    pub runs: usize,
    pub mean_accuracy: f64,
    pub min_accuracy: f64,
    pub max_accuracy: f64,
    pub mean_cost_units: f64,
}

pub fn metrics_file_name(strategy: StrategyKind, fraction: f64, seed: u64) -> String {
    format!("metrics_{}_rho{}_seed{}.csv", strategy.name(), fraction, seed)
}

/// Runs every (strategy, fraction, seed) cell on a pool of `jobs` threads and
/// writes one metrics file per cell, `summary.csv` and `aggregate.csv`.
/// Returns the summary rows in grid order; a failed cell fails the whole
/// grid after every cell has finished.
pub fn run_grid(spec: &ExperimentSpec, out: &Path, jobs: usize) -> Result<Vec<SummaryRow>> {
    spec.validate()?;
    fs::create_dir_all(out)?;
    let data = load_dataset(&spec.dataset)?;
    let strategies = spec.strategies();
    let mut cells = Vec::new();
    for s in &strategies {
        for &f in &spec.fractions {
            for &seed in &spec.seeds {
                cells.push((s, f, seed));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let results: Vec<Result<SummaryRow>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(s, f, seed)| {
                let cfg = spec.cell_config(f, seed);
                let outcome = train(&cfg, s, &spec.model, &data)?;
                write_metrics_csv(&outcome.records, &out.join(metrics_file_name(s.kind, f, seed)))?;
                let last = outcome.records.last().expect("at least one epoch");
                log::info!(
                    "{} rho={f} seed={seed}: max acc {:.4}",
                    s.kind,
                    outcome.max_test_accuracy()
                );
                Ok(SummaryRow {
                    strategy: s.kind.name().to_string(),
                    fraction: f,
                    seed,
                    max_test_accuracy: outcome.max_test_accuracy(),
                    cost_units_total: last.cost_units_cum,
                })
            })
            .collect()
    });

    let mut rows = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (r, &(s, f, seed)) in results.into_iter().zip(&cells) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                log::error!("{} rho={f} seed={seed} failed: {e}", s.kind);
                failures.push(format!("{} rho={f} seed={seed}: {e}", s.kind));
            }
        }
    }
    write_summary_csv(&rows, &out.join("summary.csv"))?;
    write_aggregate_csv(&aggregate(&rows), &out.join("aggregate.csv"))?;
    if !failures.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "{} of {} runs failed: {}",
            failures.len(),
            cells.len(),
            failures.join("; ")
        )));
    }
    Ok(rows)
}

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["strategy", "fraction", "seed", "max_test_accuracy", "cost_units_total"])?;
    for r in rows {
        w.write_record([
            r.strategy.clone(),
            r.fraction.to_string(),
            r.seed.to_string(),
            r.max_test_accuracy.to_string(),
            r.cost_units_total.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |what: &str| Error::MalformedRow {
            line,
            message: format!("bad {what}"),
        };
        if rec.len() != 5 {
            return Err(bad("column count"));
        }
        out.push(SummaryRow {
            strategy: rec[0].to_string(),
            fraction: rec[1].parse().map_err(|_| bad("fraction"))?,
            seed: rec[2].parse().map_err(|_| bad("seed"))?,
            max_test_accuracy: rec[3].parse().map_err(|_| bad("max_test_accuracy"))?,
            cost_units_total: rec[4].parse().map_err(|_| bad("cost_units_total"))?,
        });
    }
    Ok(out)
}

/// Groups rows by (strategy, fraction), keeping first-seen order.
pub fn aggregate(rows: &[SummaryRow]) -> Vec<CellAggregate> {
    let mut order: Vec<(String, u64)> = Vec::new();
    let mut groups: BTreeMap<(String, u64), Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.strategy.clone(), r.fraction.to_bits());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let n = g.len() as f64;
            let acc = g.iter().map(|r| r.max_test_accuracy);
            CellAggregate {
                strategy: key.0.clone(),
                fraction: f64::from_bits(key.1),
                runs: g.len(),
                mean_accuracy: acc.clone().sum::<f64>() / n,
                min_accuracy: acc.clone().fold(f64::INFINITY, f64::min),
                max_accuracy: acc.fold(f64::NEG_INFINITY, f64::max),
                mean_cost_units: g.iter().map(|r| r.cost_units_total).sum::<f64>() / n,
            }
        })
        .collect()
}

pub fn write_aggregate_csv(cells: &[CellAggregate], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "strategy",
        "fraction",
        "runs",
        "mean_accuracy",
        "min_accuracy",
        "max_accuracy",
        "mean_cost_units",
    ])?;
    for c in cells {
        w.write_record([
            c.strategy.clone(),
            c.fraction.to_string(),
            c.runs.to_string(),
            c.mean_accuracy.to_string(),
            c.min_accuracy.to_string(),
            c.max_accuracy.to_string(),
            c.mean_cost_units.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// For each seed: build the model at its initialization (or after
/// `eval.checkpoint_epochs` of full training), run the paired
/// gradient-error experiment and write `grad_error_seed{s}.csv`.
pub fn run_grad_error(spec: &ExperimentSpec, out: &Path) -> Result<Vec<(u64, Vec<GradErrorSample>)>> {
    spec.validate()?;
    fs::create_dir_all(out)?;
    let data = load_dataset(&spec.dataset)?;
    let strategies = spec.strategies();
    let mut all = Vec::new();
    for &seed in &spec.seeds {
        let model = if spec.eval.checkpoint_epochs == 0 {
            init_model(&spec.model, &data, seed)?
        } else {
            let cfg = TrainConfig {
                epochs: spec.eval.checkpoint_epochs,
                ..spec.cell_config(1.0, seed)
            };
            let full = crate::selection::StrategyConfig::new(StrategyKind::Full);
            train(&cfg, &full, &spec.model, &data)?.model
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(7);
        let samples = gradient_error_experiment(
            &model,
            &data.train,
            &strategies,
            spec.eval.num_batches,
            spec.eval.batch,
            spec.eval.subset,
            &mut rng,
        )?;
        write_histogram_csv(&samples, &out.join(format!("grad_error_seed{seed}.csv")))?;
        all.push((seed, samples));
    }
    Ok(all)
}

/// Outcome of one self-test check.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn rel_max_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let scale = a.max_abs().max(b.max_abs()).max(f64::MIN_POSITIVE);
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseMatrix::new(rows, cols, data).expect("finite")
}

/// Quick oracle checks: the implicit Gram identity, Gram-OMP against dense
/// OMP, and backprop against central finite differences.
pub fn selftest() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checks = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (m, d, c) = (
            rng.random_range(1..=16),
            rng.random_range(1..=8),
            rng.random_range(1..=5),
        );
        let losses = vec![0.0; m];
        let tape =
            BatchTape::new(random_matrix(m, d, &mut rng), random_matrix(m, c, &mut rng), losses).expect("valid tape");
        worst = worst.max(rel_max_diff(
            gram_implicit(&tape).as_dense(),
            gram_explicit(&tape).as_dense(),
        ));
    }
    checks.push(Check {
        name: "gram identity",
        passed: worst <= 1e-12,
        detail: format!("max relative error {worst:.2e}"),
    });

    let mut mismatches = 0;
    for _ in 0..20 {
        let atoms = random_matrix(12, 16, &mut rng);
        let target: Vec<f64> = (0..16)
            .map(|j| (0..12).map(|i| atoms.get(i, j)).sum::<f64>() / 12.0)
            .collect();
        let k = crate::gram::GramMatrix::of_rows(&atoms);
        let t = crate::gram::mean_correlations(&k);
        let cfg = OmpConfig::new(4);
        let a = omp_gram(&k, &t, &cfg);
        let b = omp_dense_oracle(&atoms, &target, &cfg);
        let same = match (a, b) {
            (Ok(a), Ok(b)) => {
                a.indices == b.indices && a.weights.iter().zip(&b.weights).all(|(x, y)| (x - y).abs() <= 1e-8)
            }
            _ => false,
        };
        mismatches += usize::from(!same);
    }
    checks.push(Check {
        name: "omp equivalence",
        passed: mismatches == 0,
        detail: format!("{mismatches} of 20 instances differ"),
    });

    let model = Mlp::new(&[2, 6, 3], Activation::Tanh, &mut rng).expect("valid widths");
    let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
    let label = 1;
    let mut grad = vec![0.0; model.num_params()];
    model.backward_into(&x, label, 1.0, &mut grad);
    let mut worst = 0.0f64;
    let h = 1e-5;
    for j in 0..model.num_params() {
        let mut plus = model.clone();
        plus.params_mut()[j] += h;
        let mut minus = model.clone();
        minus.params_mut()[j] -= h;
        let fd = (plus.example_loss(&x, label) - minus.example_loss(&x, label)) / (2.0 * h);
        worst = worst.max((fd - grad[j]).abs() / (fd.abs().max(grad[j].abs()).max(1e-8)));
    }
    checks.push(Check {
        name: "finite differences",
        passed: worst <= 1e-6,
        detail: format!("max relative error {worst:.2e}"),
    });

    let x = random_matrix(10, 2, &mut rng);
    let y: Vec<usize> = (0..10).map(|i| i % 3).collect();
    let proxy = model.last_layer_grad_check(&x, &y).unwrap_or(f64::INFINITY);
    checks.push(Check {
        name: "last-layer proxy",
        passed: proxy <= 1e-12,
        detail: format!("max relative error {proxy:.2e}"),
    });
    checks
}

/// Output directory: the flag wins over the config.
pub fn resolve_out_dir(flag: Option<PathBuf>, spec: &ExperimentSpec) -> PathBuf {
    flag.unwrap_or_else(|| spec.output_dir.clone())
}
