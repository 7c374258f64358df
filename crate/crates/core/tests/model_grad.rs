//! Backprop against finite differences and the last-layer closed form.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use selective_backprop::*;

fn setup(seed: u64, act: Activation, widths: &[usize], m: usize) -> (Mlp, DenseMatrix, Vec<usize>) {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = Mlp::new(widths, act, &mut rng).unwrap();
    let d = widths[0];
    let c = *widths.last().unwrap();
    let x = DenseMatrix::new(m, d, (0..m * d).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap();
    let y = (0..m).map(|_| rng.random_range(0..c)).collect();
    (model, x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn weighted_backward_is_linear_in_weights(seed in any::<u64>(), w in prop::collection::vec(0.0f64..3.0, 6)) {
        let (model, x, y) = setup(seed, Activation::Tanh, &[3, 7, 4], 6);
        let sel = Selection { indices: (0..6).collect(), weights: w.clone() };
        let g = model.weighted_backward(&x, &y, &sel).unwrap();
        let per = model.per_example_grads(&x, &y).unwrap();
        for j in 0..g.values.len() {
            let want: f64 = per.iter().zip(&w).map(|(p, wi)| wi * p.values[j]).sum::<f64>() / 6.0;
            prop_assert!((g.values[j] - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn last_layer_block_has_closed_form(seed in any::<u64>()) {
        let (model, x, y) = setup(seed, Activation::Relu, &[4, 9, 5, 3], 10);
        prop_assert!(model.last_layer_grad_check(&x, &y).unwrap() <= 1e-12);
    }

    #[test]
    fn gram_of_backprop_blocks_matches_implicit(seed in any::<u64>()) {
        let (model, x, y) = setup(seed, Activation::Relu, &[3, 8, 4], 12);
        let rows: Vec<Vec<f64>> = model
            .per_example_grads(&x, &y)
            .unwrap()
            .iter()
            .map(|g| g.last_layer_block().to_vec())
            .collect();
        let explicit = GramMatrix::of_rows(&DenseMatrix::from_rows(&rows).unwrap());
        let implicit = gram_implicit(&model.forward_tape(&x, &y).unwrap());
        let scale = explicit.as_dense().max_abs().max(1e-300);
        for (a, b) in explicit.as_dense().as_slice().iter().zip(implicit.as_dense().as_slice()) {
            prop_assert!((a - b).abs() <= 1e-10 * scale);
        }
    }
}

#[test]
fn central_differences_on_every_parameter() {
    for (seed, act) in [(1, Activation::Tanh), (2, Activation::Relu), (3, Activation::Tanh)] {
        let (model, x, y) = setup(seed, act, &[2, 16, 3], 1);
        let mut grad = vec![0.0; model.num_params()];
        let loss = model.backward_into(x.row(0), y[0], 1.0, &mut grad);
        assert!((loss - model.example_loss(x.row(0), y[0])).abs() < 1e-15);
        let h = 1e-5;
        let mut err = 0.0;
        for j in 0..model.num_params() {
            let mut p = model.params().to_vec();
            p[j] += h;
            let plus = Mlp::from_params(&[2, 16, 3], act, p.clone()).unwrap();
            p[j] -= 2.0 * h;
            let minus = Mlp::from_params(&[2, 16, 3], act, p).unwrap();
            let fd = (plus.example_loss(x.row(0), y[0]) - minus.example_loss(x.row(0), y[0])) / (2.0 * h);
            err += (fd - grad[j]).powi(2);
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(err.sqrt() <= 1e-6 * norm, "relative error {}", err.sqrt() / norm);
    }
}

#[test]
fn accuracy_and_prediction_agree() {
    let (model, x, y) = setup(4, Activation::Relu, &[3, 5, 4], 50);
    let acc = model.accuracy(&x, &y);
    let hits = (0..50).filter(|&i| model.predict(x.row(i)) == y[i]).count();
    assert_eq!(acc, hits as f64 / 50.0);
}
