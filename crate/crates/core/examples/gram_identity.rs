//! The last-layer Gram matrix computed from activations and output
//! gradients alone, checked against explicitly materialized gradients.

use selective_backprop::gram::last_layer_gradients;
use selective_backprop::*;

fn main() -> Result<()> {
    let h = DenseMatrix::from_rows(&[[1.0, 0.0, 2.0], [0.5, -1.0, 0.0], [0.0, 3.0, 1.0], [1.0, 0.0, 2.0]])?;
    let p = DenseMatrix::from_rows(&[[0.2, -0.2], [-0.7, 0.7], [0.1, -0.1], [0.2, -0.2]])?;
    let tape = BatchTape::new(h, p, vec![0.6, 1.9, 0.2, 0.6])?;

    let implicit = gram_implicit(&tape);
    let explicit = gram_explicit(&tape);
    let grads = last_layer_gradients(&tape, true);
    println!(
        "explicit gradients are {} x {} (C*D + C columns)",
        grads.rows(),
        grads.cols()
    );
    println!("K (implicit):\n{:?}", implicit.as_dense());

    let diff = implicit
        .as_dense()
        .as_slice()
        .iter()
        .zip(explicit.as_dense().as_slice())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    println!("max |implicit - explicit| = {diff:e}");
    println!(
        "correlations with the mean gradient: {:?}",
        mean_correlations(&implicit)
    );
    Ok(())
}
