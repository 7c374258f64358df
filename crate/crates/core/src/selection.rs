//! Minibatch subset selection strategies.
//!
//! Every strategy maps one forward-pass tape to a [`Selection`] of at most
//! `m` indices:
//!
//! * `random`: `m` indices uniformly without replacement, unit weights.
//! * `loss_based`: keep scores `CDF(loss)^beta` with `beta = M/m`, then
//!   exactly `m` indices by weighted sampling without replacement.
//! * `grad_match`: Gram OMP matching the mean last-layer gradient, weights
//!   clipped at zero and rescaled to sum to the number of selected atoms.
//! * `full`: the whole batch (the plain minibatch estimator).

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::gram::{gram_implicit_with, mean_correlations, BatchTape, GramMatrix};
use crate::omp::{omp_gram, OmpConfig, Selection};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    Full,
    Random,
    LossBased,
    GradMatch,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [Self::Full, Self::Random, Self::LossBased, Self::GradMatch];

    pub fn name(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Random => "random",
            Self::LossBased => "loss_based",
            Self::GradMatch => "grad_match",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(Self::Full),
            "random" => Ok(Self::Random),
            "loss_based" | "loss" => Ok(Self::LossBased),
            "grad_match" => Ok(Self::GradMatch),
            _ => Err(format!(
                "unknown strategy `{s}` (expected full, random, loss_based or grad_match)"
            )),
        }
    }
}

/// Where loss-based selection takes its reference distribution from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CdfSource {
    #[default]
    WithinBatch,
    RollingBuffer,
}

impl CdfSource {
    pub fn name(self) -> &'static str {
        match self {
            Self::WithinBatch => "within_batch",
            Self::RollingBuffer => "rolling_buffer",
        }
    }
}

impl FromStr for CdfSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "within_batch" => Ok(Self::WithinBatch),
            "rolling_buffer" => Ok(Self::RollingBuffer),
            _ => Err(format!(
                "unknown cdf source `{s}` (expected within_batch or rolling_buffer)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub cdf_source: CdfSource,
    /// Rolling loss buffer size `R`; `None` means 8 forward batches.
    pub buffer_capacity: Option<usize>,
    pub clip_negative: bool,
    pub abs_correlation: bool,
    /// Top up short OMP selections with random unit-weight indices.
    pub pad_to_m: bool,
    /// Include the bias gradient in the last-layer Gram matrix.
    pub with_bias: bool,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            cdf_source: CdfSource::WithinBatch,
            buffer_capacity: None,
            clip_negative: true,
            abs_correlation: false,
            pad_to_m: false,
            with_bias: true,
        }
    }
}

/// FIFO ring of the most recent loss values.
#[derive(Clone, Debug)]
pub struct LossBuffer {
    capacity: usize,
    entries: VecDeque<f64>,
}

impl LossBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "loss buffer capacity must be positive");
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn extend(&mut self, losses: &[f64]) {
        for &l in losses {
            if self.entries.len() == self.capacity {
                self.entries.pop_front();
            }
            self.entries.push_back(l);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().copied()
    }
}

/// `m` distinct indices out of `batch_size`, ascending, unit weights.
pub fn select_random<R: Rng + ?Sized>(batch_size: usize, m: usize, rng: &mut R) -> Result<Selection> {
    check_subset_size(batch_size, m)?;
    if m == batch_size {
        return Ok(Selection::full(batch_size));
    }
    let mut idx = index::sample(rng, batch_size, m).into_vec();
    idx.sort_unstable();
    Ok(Selection::unit(idx))
}

fn check_subset_size(batch_size: usize, m: usize) -> Result<()> {
    if m == 0 || m > batch_size {
        return Err(Error::BadFraction(format!(
            "subset size {m} must be in 1..={batch_size}"
        )));
    }
    Ok(())
}

/// `CDF(l_i) = |{r in reference : r <= l_i}| / |reference|`.
pub fn empirical_cdf(losses: &[f64], reference: &[f64]) -> Vec<f64> {
    assert!(!reference.is_empty(), "CDF reference must be non-empty");
    let mut sorted = reference.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    losses
        .iter()
        .map(|&l| sorted.partition_point(|&r| r <= l) as f64 / n)
        .collect()
}

/// Draws `m` distinct indices with the exponential-key method: index `i`
/// gets key `E_i / w_i` with `E_i ~ Exp(1)` and the `m` smallest keys win.
/// Works with `ln w_i` so tiny weights do not underflow. Indices with
/// `w_i = 0` (log weight `-inf`) are never drawn.
pub fn weighted_sample_without_replacement<R: Rng + ?Sized>(
    log_weights: &[f64],
    m: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let eligible = log_weights.iter().filter(|w| **w > f64::NEG_INFINITY).count();
    if eligible < m || log_weights.iter().any(|w| w.is_nan()) {
        return Err(Error::DegenerateWeights);
    }
    let mut keyed: Vec<(f64, usize)> = log_weights
        .iter()
        .enumerate()
        .map(|(i, &lw)| {
            let e: f64 = Exp1.sample(rng);
            (e.ln() - lw, i)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut idx: Vec<usize> = keyed[..m].iter().map(|&(_, i)| i).collect();
    idx.sort_unstable();
    Ok(idx)
}

/// Keep scores `CDF(l_i)^beta` with `beta = M/m`.
pub fn loss_keep_scores(losses: &[f64], m: usize, reference: &[f64]) -> Vec<f64> {
    let beta = losses.len() as f64 / m as f64;
    empirical_cdf(losses, reference)
        .into_iter()
        .map(|c| c.powf(beta))
        .collect()
}

/// Loss-based selection of exactly `m` indices with unit weights.
///
/// With [`CdfSource::RollingBuffer`] the reference distribution is the buffer
/// contents together with the current batch, so every score stays positive;
/// the batch losses are pushed into the buffer afterwards.
pub fn select_loss_based<R: Rng + ?Sized>(
    losses: &[f64],
    m: usize,
    cfg: &StrategyConfig,
    buffer: &mut LossBuffer,
    rng: &mut R,
) -> Result<Selection> {
    let batch_size = losses.len();
    check_subset_size(batch_size, m)?;
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite("losses"));
    }
    let buffered: Vec<f64>;
    let reference = match cfg.cdf_source {
        CdfSource::RollingBuffer => {
            buffered = buffer.iter().chain(losses.iter().copied()).collect();
            &buffered[..]
        }
        CdfSource::WithinBatch => losses,
    };
    let beta = batch_size as f64 / m as f64;
    let log_scores: Vec<f64> = empirical_cdf(losses, reference)
        .into_iter()
        .map(|c| beta * c.ln())
        .collect();
    let sel = if m == batch_size {
        Selection::full(batch_size)
    } else {
        Selection::unit(weighted_sample_without_replacement(&log_scores, m, rng)?)
    };
    if cfg.cdf_source == CdfSource::RollingBuffer {
        buffer.extend(losses);
    }
    Ok(sel)
}

/// Clips (optionally) and rescales weights so that `sum |gamma| = |I|`.
/// Returns `false` and leaves the selection untouched if the weights vanish.
pub fn normalize_weights(sel: &mut Selection, clip_negative: bool) -> bool {
    let mut w = sel.weights.clone();
    if clip_negative {
        w.iter_mut().for_each(|g| *g = g.max(0.0));
    }
    let l1: f64 = w.iter().map(|g| g.abs()).sum();
    if !(l1 > 0.0) || !l1.is_finite() {
        return false;
    }
    let scale = sel.len() as f64 / l1;
    sel.weights = w.into_iter().map(|g| g * scale).collect();
    true
}

/// Gradient-matching selection on a precomputed Gram matrix.
///
/// Falls back to [`select_random`] when OMP finds nothing to match or the
/// weights vanish after clipping.
pub fn select_grad_match<R: Rng + ?Sized>(
    k: &GramMatrix,
    m: usize,
    cfg: &StrategyConfig,
    rng: &mut R,
) -> Result<Selection> {
    let batch_size = k.size();
    check_subset_size(batch_size, m)?;
    let t = mean_correlations(k);
    let omp = OmpConfig {
        abs_correlation: cfg.abs_correlation,
        ..OmpConfig::new(m)
    };
    let mut sel = match omp_gram(k, &t, &omp) {
        Ok(sel) => sel,
        Err(Error::EmptySelection { max_correlation }) => {
            log::debug!("grad_match: empty OMP selection (max correlation {max_correlation:e}), using random subset");
            return select_random(batch_size, m, rng);
        }
        Err(e) => return Err(e),
    };
    if !normalize_weights(&mut sel, cfg.clip_negative) {
        log::debug!("grad_match: weights vanished after clipping, using random subset");
        return select_random(batch_size, m, rng);
    }
    if cfg.pad_to_m && sel.len() < m {
        pad_selection(&mut sel, batch_size, m, rng);
    }
    Ok(sel)
}

fn pad_selection<R: Rng + ?Sized>(sel: &mut Selection, batch_size: usize, m: usize, rng: &mut R) {
    let mut taken = vec![false; batch_size];
    sel.indices.iter().for_each(|&i| taken[i] = true);
    let rest: Vec<usize> = (0..batch_size).filter(|&i| !taken[i]).collect();
    for j in index::sample(rng, rest.len(), m - sel.len()) {
        sel.indices.push(rest[j]);
        sel.weights.push(1.0);
    }
}

/// A strategy plus the state it carries across steps (the loss buffer).
#[derive(Clone, Debug)]
pub struct Selector {
    cfg: StrategyConfig,
    buffer: LossBuffer,
}

impl Selector {
    /// `base_batch` sizes the default rolling buffer (8 batches).
    pub fn new(cfg: StrategyConfig, base_batch: usize) -> Self {
        let capacity = cfg.buffer_capacity.unwrap_or(8 * base_batch.max(1));
        Self {
            cfg,
            buffer: LossBuffer::new(capacity.max(1)),
        }
    }

    pub fn config(&self) -> &StrategyConfig {
        &self.cfg
    }

    pub fn kind(&self) -> StrategyKind {
        self.cfg.kind
    }

    pub fn select<R: Rng + ?Sized>(&mut self, tape: &BatchTape, m: usize, rng: &mut R) -> Result<Selection> {
        let batch_size = tape.batch_size();
        match self.cfg.kind {
            StrategyKind::Full => Ok(Selection::full(batch_size)),
            StrategyKind::Random => select_random(batch_size, m, rng),
            StrategyKind::LossBased => select_loss_based(&tape.losses, m, &self.cfg, &mut self.buffer, rng),
            StrategyKind::GradMatch => {
                let k = gram_implicit_with(tape, self.cfg.with_bias);
                select_grad_match(&k, m, &self.cfg, rng)
            }
        }
    }
}
