//! The three subset strategies on one forward batch of a fresh model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use selective_backprop::*;

fn main() -> Result<()> {
    let data = load_dataset(&DatasetDescriptor::blobs(600, 3, 2, 4.0, 1))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let model = ModelSpec::default().build(data.dim(), data.num_classes, &mut rng)?;
    let batch = data.train.subset(&(0..32).collect::<Vec<_>>());
    let tape = model.forward_tape(&batch.x, &batch.y)?;
    let full = model.mean_gradient(&batch.x, &batch.y)?;

    for kind in [StrategyKind::Random, StrategyKind::LossBased, StrategyKind::GradMatch] {
        let mut selector = Selector::new(StrategyConfig::new(kind), 32);
        let sel = selector.select(&tape, 8, &mut rng)?;
        let est = model.weighted_backward(&batch.x, &batch.y, &sel)?;
        println!("{kind:>10}: indices {:?}", sel.indices);
        println!("{:>10}  weights {:.2?}", "", sel.weights);
        println!("{:>10}  |g_sub - g_batch|^2 = {:.4e}", "", est.distance_sq(&full));
    }
    Ok(())
}
