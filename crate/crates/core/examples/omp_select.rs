//! Gram OMP step by step on a batch containing near-duplicates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selective_backprop::omp::GramPursuit;
use selective_backprop::*;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // Twelve atoms in R^6: three clusters of four nearly identical vectors.
    let centers: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let rows: Vec<Vec<f64>> = (0..12)
        .map(|i| {
            centers[i / 4]
                .iter()
                .map(|c| c + 0.01 * rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect();
    let atoms = DenseMatrix::from_rows(&rows)?;
    let k = GramMatrix::of_rows(&atoms);
    let t = mean_correlations(&k);
    let t0 = t.iter().sum::<f64>() / t.len() as f64;

    let mut pursuit = GramPursuit::new(&k, &t, OmpConfig::new(4))?;
    while let Some(idx) = pursuit.advance() {
        let sel = Selection {
            indices: pursuit.indices().to_vec(),
            weights: pursuit.weights().to_vec(),
        };
        println!(
            "picked {idx:>2} (cluster {}), weights {:.3?}, residual {:.3e}",
            idx / 4,
            sel.weights,
            residual_norm_sq(&k, &t, t0, &sel)
        );
    }
    println!("stopped: {:?}", pursuit.stop_reason());

    let dense = omp_dense_oracle(
        &atoms,
        &(0..6)
            .map(|j| (0..12).map(|i| atoms.get(i, j)).sum::<f64>() / 12.0)
            .collect::<Vec<_>>(),
        &OmpConfig::new(4),
    )?;
    println!("dense OMP agrees: {}", dense.indices == pursuit.indices());
    Ok(())
}
