//! Training an MLP on Gaussian blobs with each strategy at a 10% fraction.
//!
//! `cargo run --release --example train_blobs`

use selective_backprop::*;

fn main() -> Result<()> {
    let data = load_dataset(&DatasetDescriptor::default())?;
    let spec = ModelSpec::default();
    let cfg = TrainConfig {
        fraction: 0.1,
        epochs: 20,
        seed: 1,
        ..TrainConfig::default()
    };
    println!(
        "train {} / test {} points, batch sizes {:?}",
        data.train.len(),
        data.test.len(),
        resolve_batch_sizes(&cfg)?
    );
    for kind in StrategyKind::ALL {
        let outcome = train(&cfg, &StrategyConfig::new(kind), &spec, &data)?;
        let last = outcome.records.last().unwrap();
        println!(
            "{kind:>10}: max test acc {:.4}, backprops {:>6}, cost units {:>9.1}",
            outcome.max_test_accuracy(),
            last.backprop_points_cum,
            last.cost_units_cum
        );
    }
    Ok(())
}
