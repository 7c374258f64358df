//! Acceptance suite. Runs every criterion in sequence (so the timing budgets
//! are not disturbed by parallel tests), prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use selective_backprop::config::parse_config;
use selective_backprop::data::{load_dataset, synthesize, DatasetDescriptor, Split};
use selective_backprop::evalgrad::{gradient_error_experiment, median_errors};
use selective_backprop::experiment::{aggregate, read_summary_csv, run_grid};
use selective_backprop::omp::GramPursuit;
use selective_backprop::selection::{select_grad_match, select_loss_based, LossBuffer};
use selective_backprop::trainer::{apply_label_noise, init_model, RunStreams, SgdState};
use selective_backprop::*;

type Outcome = Result<String, String>;

fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseMatrix::new(rows, cols, data).unwrap()
}

fn rel_max_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let scale = a.max_abs().max(b.max_abs()).max(f64::MIN_POSITIVE);
    let diff = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / scale
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed < budget, || format!("took {elapsed:.2?}, budget {budget:.0?}"))
}

fn gram_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = rng.random_range(1..=32);
        let d = rng.random_range(1..=16);
        let c = rng.random_range(1..=8);
        let tape = BatchTape::new(
            random_matrix(m, d, &mut rng),
            random_matrix(m, c, &mut rng),
            vec![0.0; m],
        )
        .unwrap();
        worst = worst.max(rel_max_diff(
            gram_implicit(&tape).as_dense(),
            gram_explicit(&tape).as_dense(),
        ));
    }
    ensure(worst <= 1e-12, || format!("max relative error {worst:e}"))?;
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!(
        "max relative error {worst:.2e} over 100 tapes in {:.2?}",
        start.elapsed()
    ))
}

fn proxy_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for act in [Activation::Relu, Activation::Tanh] {
        for _ in 0..10 {
            let model = Mlp::new(&[5, 12, 9, 4], act, &mut rng).unwrap();
            let m = rng.random_range(1..=24);
            let x = random_matrix(m, 5, &mut rng);
            let y: Vec<usize> = (0..m).map(|_| rng.random_range(0..4)).collect();
            let blocks: Vec<Vec<f64>> = model
                .per_example_grads(&x, &y)
                .unwrap()
                .iter()
                .map(|g| g.last_layer_block().to_vec())
                .collect();
            let explicit = GramMatrix::of_rows(&DenseMatrix::from_rows(&blocks).unwrap());
            let implicit = gram_implicit(&model.forward_tape(&x, &y).unwrap());
            worst = worst.max(rel_max_diff(explicit.as_dense(), implicit.as_dense()));
        }
    }
    ensure(worst <= 1e-10, || format!("max relative error {worst:e}"))?;
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("max relative error {worst:.2e} over 20 MLP batches"))
}

fn omp_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_w = 0.0f64;
    for inst in 0..200 {
        let m_batch = rng.random_range(2..=64);
        let m = rng.random_range(1..=16.min(m_batch));
        let d = rng.random_range(m + 4..=80);
        let atoms = random_matrix(m_batch, d, &mut rng);
        let target: Vec<f64> = (0..d)
            .map(|j| (0..m_batch).map(|i| atoms.get(i, j)).sum::<f64>() / m_batch as f64)
            .collect();
        let k = GramMatrix::of_rows(&atoms);
        let t = mean_correlations(&k);
        let t0 = t.iter().sum::<f64>() / m_batch as f64;
        let cfg = OmpConfig::new(m);

        let a = omp_gram(&k, &t, &cfg).map_err(|e| format!("instance {inst}: {e}"))?;
        let b = omp_dense_oracle(&atoms, &target, &cfg).map_err(|e| format!("instance {inst}: {e}"))?;
        ensure(a.indices == b.indices, || {
            format!("instance {inst}: indices {:?} vs {:?}", a.indices, b.indices)
        })?;
        for (x, y) in a.weights.iter().zip(&b.weights) {
            worst_w = worst_w.max((x - y).abs());
        }

        let mut pursuit = GramPursuit::new(&k, &t, cfg.clone()).unwrap();
        let mut prev = t0;
        while pursuit.advance().is_some() {
            let sel = Selection {
                indices: pursuit.indices().to_vec(),
                weights: pursuit.weights().to_vec(),
            };
            let obj = residual_norm_sq(&k, &t, t0, &sel);
            ensure(obj <= prev + 1e-12 * t0.max(1.0), || {
                format!("instance {inst}: objective rose from {prev:e} to {obj:e}")
            })?;
            prev = obj;
        }
    }
    ensure(worst_w <= 1e-8, || format!("max weight difference {worst_w:e}"))?;
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "200 instances, identical indices, max weight difference {worst_w:.2e}, objective monotone"
    ))
}

fn full_support_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = StrategyConfig::new(StrategyKind::GradMatch);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = rng.random_range(1..=12);
        let atoms = random_matrix(m, m + 6, &mut rng);
        let k = GramMatrix::of_rows(&atoms);
        let sel = select_grad_match(&k, m, &cfg, &mut rng).map_err(|e| e.to_string())?;
        ensure(sel.len() == m, || format!("selected {} of {m}", sel.len()))?;
        for w in &sel.weights {
            worst = worst.max((w - 1.0).abs());
        }
    }
    ensure(worst <= 1e-8, || format!("max |gamma - 1| = {worst:e}"))?;

    let h = DenseMatrix::from_rows(&vec![vec![0.3, -1.2, 0.7]; 6]).unwrap();
    let p = DenseMatrix::from_rows(&vec![vec![0.25, -0.5, 0.25]; 6]).unwrap();
    let tape = BatchTape::new(h, p, vec![1.0; 6]).unwrap();
    let sel = select_grad_match(&gram_implicit(&tape), 3, &cfg, &mut rng).map_err(|e| e.to_string())?;
    ensure(sel.indices.len() == 1 && sel.weights == [1.0], || {
        format!("duplicate batch gave {sel:?}")
    })?;
    Ok(format!(
        "max |gamma - 1| = {worst:.2e}; duplicate batch collapses to one unit atom"
    ))
}

fn gradient_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for act in [Activation::Relu, Activation::Tanh] {
        for _ in 0..10 {
            let model = Mlp::new(&[2, 16, 3], act, &mut rng).unwrap();
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let label = rng.random_range(0..3);
            let mut grad = vec![0.0; model.num_params()];
            model.backward_into(&x, label, 1.0, &mut grad);
            let mut diff = 0.0;
            for j in 0..model.num_params() {
                let mut plus = model.clone();
                plus.params_mut()[j] += h;
                let mut minus = model.clone();
                minus.params_mut()[j] -= h;
                let fd = (plus.example_loss(&x, label) - minus.example_loss(&x, label)) / (2.0 * h);
                diff += (fd - grad[j]).powi(2);
            }
            let g_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            worst = worst.max(diff.sqrt() / g_norm.max(f64::MIN_POSITIVE));
        }
    }
    ensure(worst <= 1e-6, || format!("finite-difference relative error {worst:e}"))?;

    let model = Mlp::new(&[2, 16, 3], Activation::Relu, &mut rng).unwrap();
    let x = random_matrix(20, 2, &mut rng);
    let y: Vec<usize> = (0..20).map(|i| i % 3).collect();
    let weighted = model.weighted_backward(&x, &y, &Selection::full(20)).unwrap();
    let per = model.per_example_grads(&x, &y).unwrap();
    let mut mean_err = 0.0f64;
    for (j, w) in weighted.values.iter().enumerate() {
        let mean = per.iter().map(|g| g.values[j]).sum::<f64>() / 20.0;
        mean_err = mean_err.max((w - mean).abs() / mean.abs().max(1.0));
    }
    ensure(mean_err <= 1e-12, || {
        format!("unit-weight mean differs by {mean_err:e}")
    })?;
    Ok(format!(
        "finite-difference error {worst:.2e}; unit-weight mean error {mean_err:.2e}"
    ))
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn loss_sampling_statistics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = StrategyConfig::new(StrategyKind::LossBased);
    let mut buf = LossBuffer::new(1);
    let draws = 10_000;

    let losses = [0.9, 0.05, 2.3, 0.4, 1.7, 0.01, 3.2, 0.6];
    let mut hits = [0.0f64; 8];
    for _ in 0..draws {
        for i in select_loss_based(&losses, 2, &cfg, &mut buf, &mut rng)
            .map_err(|e| e.to_string())?
            .indices
        {
            hits[i] += 1.0;
        }
    }
    let rho = spearman(&losses, &hits);
    ensure(rho > 0.95, || format!("Spearman correlation {rho} (hits {hits:?})"))?;

    let mut counts = [0.0f64; 8];
    for _ in 0..draws {
        for i in select_loss_based(&[0.5; 8], 2, &cfg, &mut buf, &mut rng)
            .map_err(|e| e.to_string())?
            .indices
        {
            counts[i] += 1.0;
        }
    }
    let expected = draws as f64 * 2.0 / 8.0;
    let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(7.0).unwrap().cdf(chi2);
    ensure(p > 0.001, || format!("uniformity chi-square p = {p}"))?;

    let all = select_loss_based(&losses, 8, &cfg, &mut buf, &mut rng).map_err(|e| e.to_string())?;
    ensure(all == Selection::full(8), || format!("m = M gave {all:?}"))?;
    Ok(format!(
        "Spearman {rho:.3}; equal-loss chi-square p = {p:.3}; m = M selects all"
    ))
}

fn cost_model() -> Outcome {
    for big in [3usize, 6, 96, 129, 300] {
        let small = 2 * big / 3;
        if 3 * small == 2 * big {
            ensure(cost_units(big, small) == big as f64, || {
                format!("break-even fails at M = {big}")
            })?;
        }
        for m in 1..=big {
            let c = cost_units(big, m);
            ensure(c == big as f64 / 3.0 + m as f64, || format!("cost({big}, {m}) = {c}"))?;
            ensure((c < big as f64) == (3 * m < 2 * big), || {
                format!("savings condition at ({big}, {m})")
            })?;
        }
    }
    let c = cost_units(128, 64);
    ensure((c - 106.666_666_666_666_67).abs() <= 1e-9, || {
        format!("cost(128, 64) = {c}")
    })?;
    Ok(format!("cost(128, 64) = {c:.6}; break-even at m = 2M/3"))
}

fn gradient_error_ordering() -> Outcome {
    let start = Instant::now();
    let desc = DatasetDescriptor::blobs(2048, 3, 2, 4.0, 11);
    let split: Split = synthesize(&desc).map_err(|e| e.to_string())?;
    let data = Dataset {
        train: split.clone(),
        test: split.clone(),
        num_classes: 3,
    };
    let spec = ModelSpec::default();
    let strategies: Vec<StrategyConfig> = [StrategyKind::Random, StrategyKind::LossBased, StrategyKind::GradMatch]
        .into_iter()
        .map(StrategyConfig::new)
        .collect();
    let mut gm_wins = 0;
    let mut lb_losses = 0;
    let mut lines = Vec::new();
    for seed in 0..3u64 {
        let model = init_model(&spec, &data, seed).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let samples = gradient_error_experiment(&model, &split, &strategies, 200, 128, 32, &mut rng)
            .map_err(|e| e.to_string())?;
        let med = median_errors(&samples);
        let (r, l, g) = (med["random"], med["loss_based"], med["grad_match"]);
        gm_wins += usize::from(g < r);
        lb_losses += usize::from(l > r);
        lines.push(format!("seed {seed}: random {r:.3e} loss {l:.3e} match {g:.3e}"));
    }
    let summary = lines.join("; ");
    ensure(gm_wins == 3, || {
        format!("grad_match < random in {gm_wins}/3 seeds ({summary})")
    })?;
    ensure(lb_losses >= 2, || {
        format!("loss_based > random in {lb_losses}/3 seeds ({summary})")
    })?;
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("{summary}; {:.2?}", start.elapsed()))
}

/// Plain minibatch SGD written out by hand, using the trainer's streams.
fn reference_sgd(cfg: &TrainConfig, spec: &ModelSpec, data: &Dataset) -> Mlp {
    let mut model = init_model(spec, data, cfg.seed).unwrap();
    let mut order = RunStreams::rng(cfg.seed, RunStreams::ORDER);
    let mut opt = SgdState::new(cfg.optimizer, cfg.weight_decay, model.num_params());
    let n = data.train.len();
    let mut perm: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        perm.shuffle(&mut order);
        for (b, chunk) in perm.chunks(cfg.base_batch).enumerate() {
            let lr = lr_at(cfg, epoch as f64 + (b * cfg.base_batch) as f64 / n as f64);
            let mb = data.train.subset(chunk);
            let g = model.mean_gradient(&mb.x, &mb.y).unwrap();
            opt.step(model.params_mut(), &g.values, lr);
        }
    }
    model
}

fn training_protocol() -> Outcome {
    let start = Instant::now();
    let data = load_dataset(&DatasetDescriptor::default()).map_err(|e| e.to_string())?;
    let spec = ModelSpec::default();
    let cfg = TrainConfig {
        epochs: 3,
        seed: 5,
        ..TrainConfig::default()
    };
    let trained = train(&cfg, &StrategyConfig::new(StrategyKind::Random), &spec, &data).map_err(|e| e.to_string())?;
    let reference = reference_sgd(&cfg, &spec, &data);
    let same = trained
        .model
        .params()
        .iter()
        .zip(reference.params())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    ensure(same, || "random at fraction 1 differs from plain SGD".into())?;

    let text = "\
dataset.kind = blobs
dataset.n = 3000
dataset.classes = 3
dataset.separation = 4
model.hidden = 32
train.epochs = 20
strategy.kinds = random, loss_based, grad_match
grid.fractions = 0.1, 0.5
grid.seeds = 0, 1, 2
";
    let exp = parse_config(text, std::path::Path::new("acceptance.cfg")).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    run_grid(&exp, dir.path(), jobs).map_err(|e| e.to_string())?;
    let rows = read_summary_csv(&dir.path().join("summary.csv")).map_err(|e| e.to_string())?;
    ensure(rows.len() == 18, || format!("{} summary rows", rows.len()))?;
    let metrics = std::fs::read_dir(dir.path())
        .map_err(|e| e.to_string())?
        .filter(|e| {
            e.as_ref()
                .is_ok_and(|e| e.file_name().to_string_lossy().starts_with("metrics_"))
        })
        .count();
    ensure(metrics == 18, || format!("{metrics} metrics files"))?;
    let worst = rows.iter().map(|r| r.max_test_accuracy).fold(1.0, f64::min);
    ensure(worst >= 0.95, || {
        let bad: Vec<String> = rows
            .iter()
            .filter(|r| r.max_test_accuracy < 0.95)
            .map(|r| {
                format!(
                    "{} rho={} seed={}: {:.4}",
                    r.strategy, r.fraction, r.seed, r.max_test_accuracy
                )
            })
            .collect();
        format!("below 0.95: {}", bad.join(", "))
    })?;
    let cells = aggregate(&rows);
    ensure(cells.len() == 6 && cells.iter().all(|c| c.runs == 3), || {
        format!("{} cells", cells.len())
    })?;
    ensure(
        cells
            .iter()
            .all(|c| c.min_accuracy <= c.mean_accuracy + 1e-12 && c.mean_accuracy <= c.max_accuracy + 1e-12),
        || "aggregate ordering".into(),
    )?;
    within(start.elapsed(), Duration::from_secs(300))?;
    let means: Vec<String> = cells
        .iter()
        .map(|c| format!("{}@{} {:.3}", c.strategy, c.fraction, c.mean_accuracy))
        .collect();
    Ok(format!(
        "bit-identical at fraction 1; worst max accuracy {worst:.4} over 18 runs; cell means {}; {:.2?}",
        means.join(", "),
        start.elapsed()
    ))
}

fn label_noise() -> Outcome {
    let data = load_dataset(&DatasetDescriptor::default()).map_err(|e| e.to_string())?;
    let n = data.train.len();
    let run = |seed: u64| {
        let mut d = data.clone();
        let mut rng = RunStreams::rng(seed, RunStreams::NOISE);
        let idx = apply_label_noise(&mut d.train.y, 0.1, d.num_classes, &mut rng);
        (idx, d)
    };
    let (idx, noisy) = run(3);
    ensure(idx.len() == n / 10, || format!("{} of {n} redrawn", idx.len()))?;
    ensure(idx.windows(2).all(|w| w[0] < w[1]), || "indices not distinct".into())?;
    ensure(noisy.test == data.test, || "test split changed".into())?;
    let changed_outside = (0..n)
        .filter(|i| idx.binary_search(i).is_err() && noisy.train.y[*i] != data.train.y[*i])
        .count();
    ensure(changed_outside == 0, || {
        format!("{changed_outside} labels changed outside the redrawn set")
    })?;
    let (idx2, again) = run(3);
    ensure(idx2 == idx && again == noisy, || "not reproducible".into())?;
    let (idx3, _) = run(4);
    ensure(idx3 != idx, || "different seeds gave identical noise".into())?;
    Ok(format!(
        "{} of {n} train labels redrawn; test untouched; reproducible",
        idx.len()
    ))
}

fn presets() -> Outcome {
    let load = |name: &str| {
        let text = format!(
            "dataset.kind = blobs\nstrategy.kinds = random\ngrid.fractions = 1\ngrid.seeds = 0\ntrain.preset = {name}\n"
        );
        parse_config(&text, std::path::Path::new("preset.cfg")).map(|s| s.train)
    };
    let nesterov = Optimizer::SgdMomentum {
        momentum: 0.9,
        nesterov: true,
    };
    let cifar = load("cifar_style").map_err(|e| e.to_string())?;
    ensure(cifar.optimizer == nesterov, || {
        format!("cifar optimizer {:?}", cifar.optimizer)
    })?;
    ensure(
        cifar.weight_decay == 5e-4 && cifar.epochs == 200 && cifar.base_lr == 0.1 && cifar.base_batch == 128,
        || format!("cifar {cifar:?}"),
    )?;
    ensure(
        cifar.schedule
            == Schedule::Step {
                milestones: vec![60, 120, 160],
                factor: 0.2,
            },
        || format!("cifar schedule {:?}", cifar.schedule),
    )?;

    let svhn = load("svhn_style").map_err(|e| e.to_string())?;
    ensure(svhn.optimizer == nesterov && svhn.weight_decay == 5e-4, || {
        format!("svhn {svhn:?}")
    })?;
    ensure(
        svhn.schedule == Schedule::Cosine && svhn.base_lr == 0.01 && svhn.epochs == 80 && svhn.base_batch == 128,
        || format!("svhn {svhn:?}"),
    )?;

    let inet = load("imagenet32_style").map_err(|e| e.to_string())?;
    ensure(
        inet.optimizer
            == Optimizer::SgdMomentum {
                momentum: 0.9,
                nesterov: false,
            },
        || format!("imagenet32 optimizer {:?}", inet.optimizer),
    )?;
    ensure(
        inet.weight_decay == 5e-4 && inet.epochs == 40 && inet.base_lr == 0.01 && inet.base_batch == 128,
        || format!("imagenet32 {inet:?}"),
    )?;
    ensure(
        inet.schedule
            == Schedule::Step {
                milestones: vec![10, 20, 30],
                factor: 0.2,
            },
        || format!("imagenet32 schedule {:?}", inet.schedule),
    )?;
    Ok("cifar_style, svhn_style and imagenet32_style match field by field".into())
}

fn selection_overhead() -> Outcome {
    let (big, m, d, c) = (512, 128, 128, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut times = Vec::new();
    let mut selected = 0;
    for _ in 0..7 {
        let tape = BatchTape::new(
            random_matrix(big, d, &mut rng),
            random_matrix(big, c, &mut rng),
            vec![0.0; big],
        )
        .unwrap();
        let start = Instant::now();
        let k = gram_implicit(&tape);
        let t = mean_correlations(&k);
        let sel = omp_gram(&k, &t, &OmpConfig::new(m)).map_err(|e| e.to_string())?;
        times.push(start.elapsed());
        selected = sel.len();
    }
    times.sort();
    let median = times[times.len() / 2];
    within(median, Duration::from_millis(50))?;
    Ok(format!("median {median:.2?} over 7 runs ({selected} atoms selected)"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("gram identity", gram_identity),
        ("proxy identity", proxy_identity),
        ("omp oracle equivalence", omp_equivalence),
        ("full-support recovery", full_support_recovery),
        ("gradient correctness", gradient_correctness),
        ("loss-based sampling statistics", loss_sampling_statistics),
        ("cost model", cost_model),
        ("gradient-error ordering", gradient_error_ordering),
        ("training protocol", training_protocol),
        ("label noise", label_noise),
        ("presets", presets),
        ("selection overhead", selection_overhead),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
