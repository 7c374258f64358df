//! A small multilayer perceptron classifier with softmax cross-entropy,
//! written out by hand so every gradient path can be checked against finite
//! differences.
//!
//! Parameters live in one flat vector. Layer `l` occupies `W_l` (row-major,
//! `fan_out x fan_in`) followed by `b_l`; the final linear layer is last, so
//! its block is the tail of the vector and lines up with
//! [`crate::gram::last_layer_gradients`].

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gram::BatchTape;
use crate::linalg::{dot, DenseMatrix};
use crate::omp::Selection;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Self::Relu => "relu",
            Self::Tanh => "tanh",
        }
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Self::Relu => z.max(0.0),
            Self::Tanh => z.tanh(),
        }
    }

    /// Derivative given the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Self::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Tanh => 1.0 - a * a,
        }
    }

    fn init_gain(self) -> f64 {
        match self {
            Self::Relu => std::f64::consts::SQRT_2,
            Self::Tanh => 5.0 / 3.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "relu" => Ok(Self::Relu),
            "tanh" => Ok(Self::Tanh),
            _ => Err(format!("unknown activation `{s}` (expected relu or tanh)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSlot {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl LayerSlot {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.weight_offset..self.bias_offset
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        self.bias_offset..self.bias_offset + self.fan_out
    }
}

/// Where each layer's weights and bias sit in the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    widths: Vec<usize>,
    layers: Vec<LayerSlot>,
    total: usize,
}

impl ParamLayout {
    /// `widths = [input, hidden..., classes]`.
    pub fn new(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "layer widths must have at least input and output and no zeros, got {widths:?}"
            )));
        }
        let mut layers = Vec::with_capacity(widths.len() - 1);
        let mut offset = 0;
        for w in widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let slot = LayerSlot {
                fan_in,
                fan_out,
                weight_offset: offset,
                bias_offset: offset + fan_in * fan_out,
            };
            offset = slot.bias_offset + fan_out;
            layers.push(slot);
        }
        Ok(Self {
            widths: widths.to_vec(),
            layers,
            total: offset,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn layers(&self) -> &[LayerSlot] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn last_layer(&self) -> LayerSlot {
        *self.layers.last().expect("at least one layer")
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.widths.last().unwrap()
    }
}

/// A flat gradient (or parameter-shaped) vector tagged with its layout.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientVector {
    pub values: Vec<f64>,
    layout: Arc<ParamLayout>,
}

impl GradientVector {
    pub fn zeros(layout: Arc<ParamLayout>) -> Self {
        Self {
            values: vec![0.0; layout.len()],
            layout,
        }
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    /// The final layer's block: `vec(dW)` followed by `db`.
    pub fn last_layer_block(&self) -> &[f64] {
        &self.values[self.layout.last_layer().weight_offset..]
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.values, &self.values)
    }

    pub fn distance_sq(&self, other: &GradientVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, scale: f64, other: &GradientVector) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }
}

/// Multilayer perceptron: hidden layers with a shared activation, then a
/// linear layer producing logits.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layout: Arc<ParamLayout>,
    activation: Activation,
    params: Vec<f64>,
}

/// Per-example activations kept for the backward pass.
struct Trace {
    /// Pre-activations of each hidden layer.
    pre: Vec<Vec<f64>>,
    /// Layer inputs: `inputs[0]` is the example, `inputs[l]` feeds layer `l`.
    inputs: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

/// `(loss, softmax - onehot)` for one row of logits.
fn softmax_xent(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() + max - logits[label];
    let mut p: Vec<f64> = exps.into_iter().map(|e| e / sum).collect();
    p[label] -= 1.0;
    (loss, p)
}

impl Mlp {
    /// Kaiming-uniform style initialization: weights `U(+-gain*sqrt(3/fan_in))`
    /// (gain 1 for the output layer), biases `U(+-1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        let layout = ParamLayout::new(widths)?;
        let mut params = vec![0.0; layout.len()];
        let n_layers = layout.layers().len();
        for (l, slot) in layout.layers().iter().enumerate() {
            let gain = if l + 1 == n_layers { 1.0 } else { activation.init_gain() };
            let wb = gain * (3.0 / slot.fan_in as f64).sqrt();
            let bb = 1.0 / (slot.fan_in as f64).sqrt();
            for v in &mut params[slot.weight_range()] {
                *v = rng.random_range(-wb..wb);
            }
            for v in &mut params[slot.bias_range()] {
                *v = rng.random_range(-bb..bb);
            }
        }
        Ok(Self {
            layout: Arc::new(layout),
            activation,
            params,
        })
    }

    pub fn from_params(widths: &[usize], activation: Activation, params: Vec<f64>) -> Result<Self> {
        let layout = ParamLayout::new(widths)?;
        if params.len() != layout.len() {
            return Err(Error::dims(format!(
                "layout needs {} parameters, got {}",
                layout.len(),
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameters"));
        }
        Ok(Self {
            layout: Arc::new(layout),
            activation,
            params,
        })
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn check_batch(&self, x: &DenseMatrix, y: &[usize]) -> Result<()> {
        if x.rows() != y.len() {
            return Err(Error::dims(format!("{} input rows but {} labels", x.rows(), y.len())));
        }
        if x.cols() != self.layout.input_dim() {
            return Err(Error::dims(format!(
                "model expects {} input features, got {}",
                self.layout.input_dim(),
                x.cols()
            )));
        }
        let c = self.layout.num_classes();
        if let Some(&bad) = y.iter().find(|&&l| l >= c) {
            return Err(Error::dims(format!("label {bad} outside {c} classes")));
        }
        Ok(())
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let layers = self.layout.layers();
        let mut pre = Vec::with_capacity(layers.len() - 1);
        let mut inputs = Vec::with_capacity(layers.len());
        inputs.push(x.to_vec());
        let mut logits = Vec::new();
        for (l, slot) in layers.iter().enumerate() {
            let w = &self.params[slot.weight_range()];
            let b = &self.params[slot.bias_range()];
            let a = &inputs[l];
            let z: Vec<f64> = (0..slot.fan_out)
                .map(|o| dot(&w[o * slot.fan_in..(o + 1) * slot.fan_in], a) + b[o])
                .collect();
            if l + 1 == layers.len() {
                logits = z;
            } else {
                inputs.push(z.iter().map(|&v| self.activation.apply(v)).collect());
                pre.push(z);
            }
        }
        Trace { pre, inputs, logits }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.trace(x).logits
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let z = self.logits(x);
        // First maximum wins.
        z.iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
            )
            .0
    }

    pub fn example_loss(&self, x: &[f64], label: usize) -> f64 {
        softmax_xent(&self.logits(x), label).0
    }

    pub fn accuracy(&self, x: &DenseMatrix, y: &[usize]) -> f64 {
        if y.is_empty() {
            return 0.0;
        }
        let correct = (0..x.rows()).filter(|&i| self.predict(x.row(i)) == y[i]).count();
        correct as f64 / y.len() as f64
    }

    /// Forward pass over a batch, keeping the final-layer inputs `H`, the
    /// logit gradients `P = softmax(z) - onehot(y)` and per-example losses.
    pub fn forward_tape(&self, x: &DenseMatrix, y: &[usize]) -> Result<BatchTape> {
        self.check_batch(x, y)?;
        let last = self.layout.last_layer();
        let m = x.rows();
        let mut h = Vec::with_capacity(m * last.fan_in);
        let mut p = Vec::with_capacity(m * last.fan_out);
        let mut losses = Vec::with_capacity(m);
        for i in 0..m {
            let tr = self.trace(x.row(i));
            let (loss, pi) = softmax_xent(&tr.logits, y[i]);
            h.extend_from_slice(tr.inputs.last().unwrap());
            p.extend_from_slice(&pi);
            losses.push(loss);
        }
        if losses.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("losses"));
        }
        BatchTape::new(
            DenseMatrix::from_vec_unchecked(m, last.fan_in, h),
            DenseMatrix::from_vec_unchecked(m, last.fan_out, p),
            losses,
        )
    }

    /// Adds `scale * grad(loss(x, label))` into `grad`. Returns the loss.
    pub fn backward_into(&self, x: &[f64], label: usize, scale: f64, grad: &mut [f64]) -> f64 {
        debug_assert_eq!(grad.len(), self.params.len());
        let tr = self.trace(x);
        let (loss, p) = softmax_xent(&tr.logits, label);
        let mut delta: Vec<f64> = p.into_iter().map(|v| v * scale).collect();
        let layers = self.layout.layers();
        for l in (0..layers.len()).rev() {
            let slot = &layers[l];
            let a = &tr.inputs[l];
            let gw = &mut grad[slot.weight_range()];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (g, &ai) in gw[o * slot.fan_in..(o + 1) * slot.fan_in].iter_mut().zip(a) {
                    *g += d * ai;
                }
            }
            for (g, &d) in grad[slot.bias_range()].iter_mut().zip(&delta) {
                *g += d;
            }
            if l == 0 {
                break;
            }
            let w = &self.params[slot.weight_range()];
            let mut prev = vec![0.0; slot.fan_in];
            for (o, &d) in delta.iter().enumerate() {
                for (pv, &wv) in prev.iter_mut().zip(&w[o * slot.fan_in..(o + 1) * slot.fan_in]) {
                    *pv += wv * d;
                }
            }
            let z = &tr.pre[l - 1];
            for (j, pv) in prev.iter_mut().enumerate() {
                *pv *= self.activation.derivative(z[j], a[j]);
            }
            delta = prev;
        }
        loss
    }

    /// `(1/|I|) sum_{i in I} gamma_i grad(loss_i)`.
    pub fn weighted_backward(&self, x: &DenseMatrix, y: &[usize], sel: &Selection) -> Result<GradientVector> {
        self.check_batch(x, y)?;
        if sel.is_empty() || sel.indices.len() != sel.weights.len() {
            return Err(Error::dims("selection must be non-empty with one weight per index"));
        }
        if let Some(&bad) = sel.indices.iter().find(|&&i| i >= x.rows()) {
            return Err(Error::dims(format!(
                "selection index {bad} outside batch of {}",
                x.rows()
            )));
        }
        let mut g = GradientVector::zeros(self.layout.clone());
        let n = sel.len() as f64;
        for (&i, &w) in sel.indices.iter().zip(&sel.weights) {
            self.backward_into(x.row(i), y[i], w / n, &mut g.values);
        }
        Ok(g)
    }

    /// Plain mean gradient over a batch.
    pub fn mean_gradient(&self, x: &DenseMatrix, y: &[usize]) -> Result<GradientVector> {
        self.weighted_backward(x, y, &Selection::full(x.rows()))
    }

    pub fn per_example_grads(&self, x: &DenseMatrix, y: &[usize]) -> Result<Vec<GradientVector>> {
        self.check_batch(x, y)?;
        Ok((0..x.rows())
            .map(|i| {
                let mut g = GradientVector::zeros(self.layout.clone());
                self.backward_into(x.row(i), y[i], 1.0, &mut g.values);
                g
            })
            .collect())
    }

    /// Largest relative discrepancy between the last-layer block of the
    /// backpropagated per-example gradients and the closed form
    /// `[vec(p h^T); p]` built from the forward tape.
    pub fn last_layer_grad_check(&self, x: &DenseMatrix, y: &[usize]) -> Result<f64> {
        let tape = self.forward_tape(x, y)?;
        let closed = crate::gram::last_layer_gradients(&tape, true);
        let grads = self.per_example_grads(x, y)?;
        let mut worst = 0.0f64;
        for (i, g) in grads.iter().enumerate() {
            let block = g.last_layer_block();
            let reference = closed.row(i);
            let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let diff = block
                .iter()
                .zip(reference)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let rel = if scale > 0.0 { diff / scale } else { diff };
            worst = worst.max(rel);
        }
        Ok(worst)
    }
}

/// Architecture as written in a config: hidden widths and activation. Input
/// and output widths come from the dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Fixed initialization seed; `None` derives it from the run seed.
    pub init_seed: Option<u64>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            hidden: vec![32],
            activation: Activation::Relu,
            init_seed: None,
        }
    }
}

impl ModelSpec {
    pub fn widths(&self, input_dim: usize, num_classes: usize) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(input_dim);
        w.extend_from_slice(&self.hidden);
        w.push(num_classes);
        w
    }

    pub fn build<R: Rng + ?Sized>(&self, input_dim: usize, num_classes: usize, rng: &mut R) -> Result<Mlp> {
        Mlp::new(&self.widths(input_dim, num_classes), self.activation, rng)
    }
}
