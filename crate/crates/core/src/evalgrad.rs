//! Quality of subset gradient estimates: squared distance between each
//! strategy's weighted subset gradient and the exact full-dataset gradient,
//! at one fixed parameter point.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Split;
use crate::error::{Error, Result};
use crate::model::{GradientVector, Mlp};
use crate::omp::Selection;
use crate::selection::{Selector, StrategyConfig};

/// Rows per chunk when streaming the full gradient.
const CHUNK: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct GradErrorSample {
    pub strategy: String,
    pub batch_index: usize,
    pub squared_error: f64,
}

/// Exact mean gradient over every example of `split`.
pub fn full_dataset_gradient(model: &Mlp, split: &Split) -> Result<GradientVector> {
    if split.is_empty() {
        return Err(Error::InvalidConfig("full gradient of an empty dataset".into()));
    }
    let mut g = GradientVector::zeros(model.layout().clone());
    let scale = 1.0 / split.len() as f64;
    for start in (0..split.len()).step_by(CHUNK) {
        for i in start..(start + CHUNK).min(split.len()) {
            model.backward_into(split.x.row(i), split.y[i], scale, &mut g.values);
        }
    }
    Ok(g)
}

/// Draws `num_batches` minibatches of size `batch` and, for each, lets every
/// strategy pick `m` points. All strategies see the same minibatches; each
/// has its own selection stream so adding a strategy does not perturb the
/// others.
pub fn gradient_error_experiment<R: Rng + ?Sized>(
    model: &Mlp,
    split: &Split,
    strategies: &[StrategyConfig],
    num_batches: usize,
    batch: usize,
    m: usize,
    rng: &mut R,
) -> Result<Vec<GradErrorSample>> {
    if m == 0 || m > batch || batch > split.len() {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= m <= M <= N, got m = {m}, M = {batch}, N = {}",
            split.len()
        )));
    }
    let full = full_dataset_gradient(model, split)?;
    let mut selectors: Vec<(Selector, ChaCha8Rng)> = strategies
        .iter()
        .map(|s| (Selector::new(s.clone(), batch), ChaCha8Rng::seed_from_u64(rng.random())))
        .collect();

    let mut out = Vec::with_capacity(num_batches * strategies.len());
    for b in 0..num_batches {
        let idx = index::sample(rng, split.len(), batch).into_vec();
        let mb = split.subset(&idx);
        let tape = model.forward_tape(&mb.x, &mb.y)?;
        for (selector, srng) in &mut selectors {
            let sel = selector.select(&tape, m, srng)?;
            let est = model.weighted_backward(&mb.x, &mb.y, &sel)?;
            out.push(GradErrorSample {
                strategy: selector.kind().name().to_string(),
                batch_index: b,
                squared_error: est.distance_sq(&full),
            });
        }
    }
    Ok(out)
}

/// Error of the plain minibatch mean over the whole forward batch.
pub fn minibatch_error(model: &Mlp, split: &Split, idx: &[usize], full: &GradientVector) -> Result<f64> {
    let mb = split.subset(idx);
    let g = model.weighted_backward(&mb.x, &mb.y, &Selection::full(idx.len()))?;
    Ok(g.distance_sq(full))
}

/// Median squared error per strategy name.
pub fn median_errors(samples: &[GradErrorSample]) -> BTreeMap<String, f64> {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for s in samples {
        groups.entry(s.strategy.clone()).or_default().push(s.squared_error);
    }
    groups
        .into_iter()
        .map(|(k, mut v)| {
            v.sort_by(f64::total_cmp);
            let n = v.len();
            let med = if n % 2 == 1 {
                v[n / 2]
            } else {
                0.5 * (v[n / 2 - 1] + v[n / 2])
            };
            (k, med)
        })
        .collect()
}

pub fn write_histogram_csv(samples: &[GradErrorSample], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["strategy", "batch_index", "squared_error"])?;
    for s in samples {
        w.write_record([
            s.strategy.clone(),
            s.batch_index.to_string(),
            s.squared_error.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_histogram_csv(path: &Path) -> Result<Vec<GradErrorSample>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |what: &str| Error::MalformedRow {
            line,
            message: format!("bad {what}"),
        };
        if rec.len() != 3 {
            return Err(bad("column count"));
        }
        out.push(GradErrorSample {
            strategy: rec[0].to_string(),
            batch_index: rec[1].parse().map_err(|_| bad("batch_index"))?,
            squared_error: rec[2].parse().map_err(|_| bad("squared_error"))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::model::Activation;
    use crate::selection::StrategyKind;

    fn toy(n: usize, seed: u64) -> (Mlp, Split) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = Mlp::new(&[3, 5, 2], Activation::Tanh, &mut rng).unwrap();
        let data: Vec<f64> = (0..n * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = (0..n).map(|_| rng.random_range(0..2)).collect();
        (
            model,
            Split {
                x: DenseMatrix::new(n, 3, data).unwrap(),
                y,
            },
        )
    }

    #[test]
    fn single_point_gradient() {
        let (model, split) = toy(1, 1);
        let g = full_dataset_gradient(&model, &split).unwrap();
        let per = model.per_example_grads(&split.x, &split.y).unwrap();
        assert!(g.distance_sq(&per[0]) < 1e-30);
    }

    #[test]
    fn duplicated_dataset_is_unchanged() {
        let (model, split) = toy(40, 2);
        let idx: Vec<usize> = (0..40).chain(0..40).collect();
        let doubled = split.subset(&idx);
        let a = full_dataset_gradient(&model, &split).unwrap();
        let b = full_dataset_gradient(&model, &doubled).unwrap();
        assert!(a.distance_sq(&b).sqrt() <= 1e-12 * a.norm_sq().sqrt());
    }

    #[test]
    fn matches_explicit_accumulation() {
        let (model, split) = toy(1300, 3);
        let g = full_dataset_gradient(&model, &split).unwrap();
        let per = model.per_example_grads(&split.x, &split.y).unwrap();
        let mut acc = vec![0.0; g.values.len()];
        for p in &per {
            for (a, v) in acc.iter_mut().zip(&p.values) {
                *a += v;
            }
        }
        for (a, v) in acc.iter().zip(&g.values) {
            assert!((a / 1300.0 - v).abs() <= 1e-12 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn full_strategy_on_whole_dataset_is_exact() {
        let (model, split) = toy(16, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = [StrategyConfig::new(StrategyKind::Full)];
        let s = gradient_error_experiment(&model, &split, &cfg, 3, 16, 16, &mut rng).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|e| e.squared_error < 1e-28));
    }

    #[test]
    fn random_with_m_equal_batch_is_the_minibatch_estimator() {
        let (model, split) = toy(100, 5);
        let full = full_dataset_gradient(&model, &split).unwrap();
        let cfg = [StrategyConfig::new(StrategyKind::Random)];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = gradient_error_experiment(&model, &split, &cfg, 1, 20, 20, &mut rng).unwrap();

        // Replay the same minibatch draw.
        let mut replay = ChaCha8Rng::seed_from_u64(9);
        let _: u64 = replay.random();
        let idx = index::sample(&mut replay, 100, 20).into_vec();
        let want = minibatch_error(&model, &split, &idx, &full).unwrap();
        assert!((s[0].squared_error - want).abs() <= 1e-12 * want.max(1e-300));
    }

    #[test]
    fn paired_and_counted() {
        let (model, split) = toy(200, 6);
        let cfgs: Vec<_> = [StrategyKind::Random, StrategyKind::LossBased, StrategyKind::GradMatch]
            .into_iter()
            .map(StrategyConfig::new)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = gradient_error_experiment(&model, &split, &cfgs, 7, 32, 8, &mut rng).unwrap();
        assert_eq!(s.len(), 21);
        for name in ["random", "loss_based", "grad_match"] {
            assert_eq!(s.iter().filter(|e| e.strategy == name).count(), 7);
        }
        assert!(s.iter().all(|e| e.squared_error >= 0.0));

        let f = tempfile::NamedTempFile::new().unwrap();
        write_histogram_csv(&s, f.path()).unwrap();
        assert_eq!(read_histogram_csv(f.path()).unwrap(), s);
    }

    #[test]
    fn rejects_bad_sizes() {
        let (model, split) = toy(10, 7);
        let cfg = [StrategyConfig::new(StrategyKind::Random)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(gradient_error_experiment(&model, &split, &cfg, 1, 11, 2, &mut rng).is_err());
        assert!(gradient_error_experiment(&model, &split, &cfg, 1, 5, 6, &mut rng).is_err());
    }

    #[test]
    fn medians() {
        let mk = |s: &str, e| GradErrorSample {
            strategy: s.into(),
            batch_index: 0,
            squared_error: e,
        };
        let m = median_errors(&[mk("a", 3.0), mk("a", 1.0), mk("a", 2.0), mk("b", 1.0), mk("b", 4.0)]);
        assert_eq!(m["a"], 2.0);
        assert_eq!(m["b"], 2.5);
    }
}
