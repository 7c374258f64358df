//! The selective-backprop training loop.
//!
//! Each step forward-propagates `M` points, lets the strategy pick a
//! weighted subset of `m`, and applies an SGD update with the weighted mean
//! gradient of that subset. Epochs are counted in forward-propagated points,
//! so a run at fraction `rho` backpropagates roughly `rho` times as many
//! points as a full run of the same length.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{Mlp, ModelSpec};
use crate::selection::{Selector, StrategyConfig, StrategyKind};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BatchMode {
    /// Forward batch `M = M_base`, backward batch `m = rho * M_base`.
    #[default]
    Fixed,
    /// Forward batch `M = M_base / rho`, backward batch `m = M_base`.
    Scaled,
}

impl BatchMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fixed => "fixed",
            Self::Scaled => "scaled",
        }
    }
}

impl FromStr for BatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "scaled" => Ok(Self::Scaled),
            _ => Err(format!("unknown batch mode `{s}` (expected fixed or scaled)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Optimizer {
    PlainSgd,
    SgdMomentum { momentum: f64, nesterov: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    Constant,
    /// Multiply by `factor` once the epoch reaches each milestone.
    Step {
        milestones: Vec<usize>,
        factor: f64,
    },
    /// Cosine annealing from the initial rate to zero over the run.
    Cosine,
}

impl Schedule {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Step { .. } => "step",
            Self::Cosine => "cosine",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub base_batch: usize,
    pub fraction: f64,
    pub batch_mode: BatchMode,
    pub epochs: usize,
    pub optimizer: Optimizer,
    pub weight_decay: f64,
    pub schedule: Schedule,
    pub base_lr: f64,
    /// Learning-rate factor: initial rate is `lr_factor * base_lr`.
    pub lr_factor: f64,
    /// Stretch epochs and milestones by `1 / lr_factor`.
    pub stretch_schedule: bool,
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            base_batch: 128,
            fraction: 1.0,
            batch_mode: BatchMode::Fixed,
            epochs: 20,
            optimizer: Optimizer::SgdMomentum {
                momentum: 0.9,
                nesterov: true,
            },
            weight_decay: 5e-4,
            schedule: Schedule::Constant,
            base_lr: 0.05,
            lr_factor: 1.0,
            stretch_schedule: false,
            label_noise: 0.0,
            seed: 0,
        }
    }
}

/// Named hyperparameter presets for the image benchmarks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    CifarStyle,
    SvhnStyle,
    Imagenet32Style,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Self::CifarStyle, Self::SvhnStyle, Self::Imagenet32Style];

    pub fn name(self) -> &'static str {
        match self {
            Self::CifarStyle => "cifar_style",
            Self::SvhnStyle => "svhn_style",
            Self::Imagenet32Style => "imagenet32_style",
        }
    }

    pub fn config(self) -> TrainConfig {
        let base = TrainConfig {
            base_batch: 128,
            weight_decay: 5e-4,
            ..TrainConfig::default()
        };
        match self {
            Self::CifarStyle => TrainConfig {
                optimizer: Optimizer::SgdMomentum {
                    momentum: 0.9,
                    nesterov: true,
                },
                epochs: 200,
                base_lr: 0.1,
                schedule: Schedule::Step {
                    milestones: vec![60, 120, 160],
                    factor: 0.2,
                },
                ..base
            },
            Self::SvhnStyle => TrainConfig {
                optimizer: Optimizer::SgdMomentum {
                    momentum: 0.9,
                    nesterov: true,
                },
                epochs: 80,
                base_lr: 0.01,
                schedule: Schedule::Cosine,
                ..base
            },
            Self::Imagenet32Style => TrainConfig {
                optimizer: Optimizer::SgdMomentum {
                    momentum: 0.9,
                    nesterov: false,
                },
                epochs: 40,
                base_lr: 0.01,
                schedule: Schedule::Step {
                    milestones: vec![10, 20, 30],
                    factor: 0.2,
                },
                ..base
            },
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset `{s}` (expected cifar_style, svhn_style or imagenet32_style)"))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::BadFraction(format!(
                "subsampling fraction must be in (0, 1], got {}",
                self.fraction
            )));
        }
        if self.base_batch == 0 || self.epochs == 0 {
            return Err(Error::InvalidConfig("base batch and epochs must be positive".into()));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor <= 10.0) {
            return Err(Error::InvalidConfig(format!(
                "learning-rate factor must be in (0, 10], got {}",
                self.lr_factor
            )));
        }
        if !(self.base_lr > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig(
                "learning rate must be positive and weight decay non-negative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return Err(Error::InvalidConfig(format!(
                "label noise must be in [0, 1), got {}",
                self.label_noise
            )));
        }
        if let Optimizer::SgdMomentum { momentum, .. } = self.optimizer {
            if !(0.0..1.0).contains(&momentum) {
                return Err(Error::InvalidConfig(format!(
                    "momentum must be in [0, 1), got {momentum}"
                )));
            }
        }
        if let Schedule::Step { milestones, factor } = &self.schedule {
            if milestones.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig("milestones must be strictly increasing".into()));
            }
            if !(*factor > 0.0) {
                return Err(Error::InvalidConfig("decay factor must be positive".into()));
            }
        }
        Ok(())
    }

    fn stretch(&self) -> f64 {
        if self.stretch_schedule {
            1.0 / self.lr_factor
        } else {
            1.0
        }
    }

    /// Epoch budget after stretching, rounded to whole epochs.
    pub fn total_epochs(&self) -> usize {
        ((self.epochs as f64 * self.stretch()).round() as usize).max(1)
    }

    /// Milestones after stretching.
    pub fn effective_milestones(&self) -> Vec<f64> {
        match &self.schedule {
            Schedule::Step { milestones, .. } => milestones.iter().map(|&m| m as f64 * self.stretch()).collect(),
            _ => Vec::new(),
        }
    }

    pub fn initial_lr(&self) -> f64 {
        self.lr_factor * self.base_lr
    }
}

/// Forward and backward batch sizes `(M, m)`.
pub fn resolve_batch_sizes(cfg: &TrainConfig) -> Result<(usize, usize)> {
    if !(cfg.fraction > 0.0 && cfg.fraction <= 1.0) {
        return Err(Error::BadFraction(format!(
            "subsampling fraction must be in (0, 1], got {}",
            cfg.fraction
        )));
    }
    let base = cfg.base_batch;
    let (big, small) = match cfg.batch_mode {
        BatchMode::Fixed => (base, ((cfg.fraction * base as f64).round() as usize).max(1)),
        BatchMode::Scaled => ((base as f64 / cfg.fraction).round() as usize, base),
    };
    if small < 1 || small > big {
        return Err(Error::BadFraction(format!(
            "fraction {} gives backward batch {small} of forward batch {big}",
            cfg.fraction
        )));
    }
    Ok((big, small))
}

/// Backward batch for a trailing partial forward batch: `floor(rho * M')`,
/// at least one.
pub fn partial_subset_size(forward: usize, fraction: f64) -> usize {
    ((fraction * forward as f64).floor() as usize).clamp(1, forward)
}

/// Cost of one selective step in forward+backward units: a forward pass is a
/// third of a full pass, so `M/3 + m`. A plain step over `M` costs `M`.
pub fn cost_units(forward: usize, backward: usize) -> f64 {
    forward as f64 / 3.0 + backward as f64
}

/// Learning rate at a (fractional) epoch.
pub fn lr_at(cfg: &TrainConfig, epoch: f64) -> f64 {
    let init = cfg.initial_lr();
    match &cfg.schedule {
        Schedule::Constant => init,
        Schedule::Step { factor, .. } => {
            let passed = cfg.effective_milestones().iter().filter(|&&m| epoch >= m).count();
            init * factor.powi(passed as i32)
        }
        Schedule::Cosine => {
            let horizon = cfg.epochs as f64 * cfg.stretch();
            let progress = (epoch / horizon).clamp(0.0, 1.0);
            0.5 * init * (1.0 + (std::f64::consts::PI * progress).cos())
        }
    }
}

/// Relabels `floor(fraction * N)` distinct, uniformly chosen entries with a
/// label drawn uniformly from all classes (possibly the original one).
/// Returns the redrawn positions in ascending order.
pub fn apply_label_noise<R: Rng + ?Sized>(
    labels: &mut [usize],
    fraction: f64,
    num_classes: usize,
    rng: &mut R,
) -> Vec<usize> {
    assert!((0.0..1.0).contains(&fraction), "label noise fraction must be in [0, 1)");
    let count = (fraction * labels.len() as f64).floor() as usize;
    if count == 0 {
        return Vec::new();
    }
    let mut idx = index::sample(rng, labels.len(), count).into_vec();
    idx.sort_unstable();
    for &i in &idx {
        labels[i] = rng.random_range(0..num_classes);
    }
    idx
}

/// Momentum SGD with coupled weight decay:
/// `g' = g + wd * theta`, `v = mu v + g'`, step along `v` (heavy ball) or
/// `g' + mu v` (Nesterov).
#[derive(Clone, Debug)]
pub struct SgdState {
    optimizer: Optimizer,
    weight_decay: f64,
    velocity: Vec<f64>,
}

impl SgdState {
    pub fn new(optimizer: Optimizer, weight_decay: f64, num_params: usize) -> Self {
        let velocity = match optimizer {
            Optimizer::PlainSgd => Vec::new(),
            Optimizer::SgdMomentum { .. } => vec![0.0; num_params],
        };
        Self {
            optimizer,
            weight_decay,
            velocity,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        let wd = self.weight_decay;
        match self.optimizer {
            Optimizer::PlainSgd => {
                for (p, &g) in params.iter_mut().zip(grad) {
                    *p -= lr * (g + wd * *p);
                }
            }
            Optimizer::SgdMomentum { momentum, nesterov } => {
                for ((p, &g), v) in params.iter_mut().zip(grad).zip(&mut self.velocity) {
                    let g = g + wd * *p;
                    *v = momentum * *v + g;
                    let d = if nesterov { g + momentum * *v } else { *v };
                    *p -= lr * d;
                }
            }
        }
    }
}

/// One row per epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub step: usize,
    /// Mean forward-pass loss over the epoch.
    pub train_loss: f64,
    pub test_accuracy: f64,
    pub backprop_points_cum: usize,
    pub cost_units_cum: f64,
    pub selection_size_mean: f64,
    pub weight_max: f64,
}

pub const METRICS_HEADER: [&str; 8] = [
    "epoch",
    "step",
    "train_loss",
    "test_accuracy",
    "backprop_points_cum",
    "cost_units_cum",
    "selection_size_mean",
    "weight_max",
];

pub fn write_metrics_csv(records: &[MetricsRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    for r in records {
        w.write_record([
            r.epoch.to_string(),
            r.step.to_string(),
            r.train_loss.to_string(),
            r.test_accuracy.to_string(),
            r.backprop_points_cum.to_string(),
            r.cost_units_cum.to_string(),
            r.selection_size_mean.to_string(),
            r.weight_max.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |j: usize| -> Result<&str> {
            rec.get(j).ok_or_else(|| Error::MalformedRow {
                line,
                message: format!("missing column {}", METRICS_HEADER[j]),
            })
        };
        let bad = |j: usize| Error::MalformedRow {
            line,
            message: format!("bad value in column {}", METRICS_HEADER[j]),
        };
        let u = |j: usize| -> Result<usize> { field(j)?.parse().map_err(|_| bad(j)) };
        let f = |j: usize| -> Result<f64> { field(j)?.parse().map_err(|_| bad(j)) };
        out.push(MetricsRecord {
            epoch: u(0)?,
            step: u(1)?,
            train_loss: f(2)?,
            test_accuracy: f(3)?,
            backprop_points_cum: u(4)?,
            cost_units_cum: f(5)?,
            selection_size_mean: f(6)?,
            weight_max: f(7)?,
        });
    }
    Ok(out)
}

/// Independent random streams derived from one run seed.
pub struct RunStreams;

impl RunStreams {
    pub const INIT: u64 = 0;
    pub const ORDER: u64 = 1;
    pub const SELECTION: u64 = 2;
    pub const NOISE: u64 = 3;

    pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    }
}

/// Builds the initial model for a run.
pub fn init_model(spec: &ModelSpec, data: &Dataset, seed: u64) -> Result<Mlp> {
    let mut rng = RunStreams::rng(spec.init_seed.unwrap_or(seed), RunStreams::INIT);
    spec.build(data.dim(), data.num_classes, &mut rng)
}

/// Final model plus per-epoch metrics.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Mlp,
    pub records: Vec<MetricsRecord>,
}

impl TrainOutcome {
    pub fn max_test_accuracy(&self) -> f64 {
        self.records.iter().map(|r| r.test_accuracy).fold(0.0, f64::max)
    }
}

pub fn run_training(
    cfg: &TrainConfig,
    strategy: &StrategyConfig,
    model_spec: &ModelSpec,
    data: &Dataset,
) -> Result<Vec<MetricsRecord>> {
    train(cfg, strategy, model_spec, data).map(|o| o.records)
}

/// The full training loop. Deterministic in `(cfg, strategy, model_spec, data)`.
pub fn train(
    cfg: &TrainConfig,
    strategy: &StrategyConfig,
    model_spec: &ModelSpec,
    data: &Dataset,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (forward, backward) = resolve_batch_sizes(cfg)?;
    let n = data.train.len();
    if n == 0 {
        return Err(Error::InvalidConfig("empty training split".into()));
    }

    let mut model = init_model(model_spec, data, cfg.seed)?;
    let mut order_rng = RunStreams::rng(cfg.seed, RunStreams::ORDER);
    let mut select_rng = RunStreams::rng(cfg.seed, RunStreams::SELECTION);
    let mut noise_rng = RunStreams::rng(cfg.seed, RunStreams::NOISE);

    let mut train_y = data.train.y.clone();
    apply_label_noise(&mut train_y, cfg.label_noise, data.num_classes, &mut noise_rng);

    let mut selector = Selector::new(strategy.clone(), cfg.base_batch);
    let mut opt = SgdState::new(cfg.optimizer, cfg.weight_decay, model.num_params());
    let full_only = strategy.kind == StrategyKind::Full;

    let mut records = Vec::with_capacity(cfg.total_epochs());
    let mut step = 0usize;
    let mut backprop_cum = 0usize;
    let mut cost_cum = 0.0f64;
    let mut perm: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.total_epochs() {
        perm.shuffle(&mut order_rng);
        let mut loss_sum = 0.0;
        let mut sel_sum = 0usize;
        let mut steps_in_epoch = 0usize;
        let mut weight_max = f64::NEG_INFINITY;

        for (b, chunk) in perm.chunks(forward).enumerate() {
            let lr = lr_at(cfg, epoch as f64 + (b * forward) as f64 / n as f64);
            let x = data.train.x.select_rows(chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| train_y[i]).collect();
            let tape = match model.forward_tape(&x, &y) {
                Ok(t) => t,
                Err(Error::NonFinite(_)) => return Err(Error::NonFiniteLoss { epoch, step }),
                Err(e) => return Err(e),
            };
            let m = if chunk.len() == forward {
                backward
            } else {
                partial_subset_size(chunk.len(), cfg.fraction)
            };
            let sel = selector.select(&tape, m, &mut select_rng)?;
            let grad = model.weighted_backward(&x, &y, &sel)?;
            opt.step(model.params_mut(), &grad.values, lr);

            step += 1;
            steps_in_epoch += 1;
            loss_sum += tape.losses.iter().sum::<f64>();
            sel_sum += sel.len();
            backprop_cum += sel.len();
            cost_cum += if full_only {
                chunk.len() as f64
            } else {
                cost_units(chunk.len(), sel.len())
            };
            weight_max = weight_max.max(sel.max_weight());
        }

        let train_loss = loss_sum / n as f64;
        if !train_loss.is_finite() || model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch, step });
        }
        let test_accuracy = model.accuracy(&data.test.x, &data.test.y);
        log::debug!("epoch {} loss {train_loss:.4} acc {test_accuracy:.4}", epoch + 1);
        records.push(MetricsRecord {
            epoch: epoch + 1,
            step,
            train_loss,
            test_accuracy,
            backprop_points_cum: backprop_cum,
            cost_units_cum: cost_cum,
            selection_size_mean: sel_sum as f64 / steps_in_epoch as f64,
            weight_max,
        });
    }
    Ok(TrainOutcome { model, records })
}
