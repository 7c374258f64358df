//! How far each strategy's subset gradient lands from the full-dataset
//! gradient at a random initialization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use selective_backprop::evalgrad::median_errors;
use selective_backprop::trainer::init_model;
use selective_backprop::*;

fn main() -> Result<()> {
    let data = load_dataset(&DatasetDescriptor::blobs(2048, 3, 2, 4.0, 11))?;
    let strategies: Vec<_> = StrategyKind::ALL.into_iter().map(StrategyConfig::new).collect();
    for seed in 0..3 {
        let model = init_model(&ModelSpec::default(), &data, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = gradient_error_experiment(&model, &data.train, &strategies, 200, 128, 32, &mut rng)?;
        let med = median_errors(&samples);
        let line: Vec<String> = med.iter().map(|(k, v)| format!("{k} {v:.3e}")).collect();
        println!("seed {seed}: median squared error: {}", line.join(", "));
    }
    Ok(())
}
