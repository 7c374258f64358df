//! Gram matrix of last-layer gradients.
//!
//! For a final linear layer `z = W h + b` the per-example gradients are
//! `dW = p h^T` and `db = p`, where `p` is the gradient of the loss with
//! respect to the logits. Their pairwise inner products factor as
//! `(h_i . h_j)(p_i . p_j) + p_i . p_j`, so the whole matrix is
//! `K = (H H^T) o (P P^T) + P P^T` and never needs the `C*D`-dimensional
//! gradients themselves. [`gram_explicit`] builds those gradients anyway and
//! is kept as a reference for tests and the self-test.

use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix};

/// Forward-pass byproducts of one minibatch.
#[derive(Clone, Debug)]
pub struct BatchTape {
    /// Inputs to the final linear layer, `M x D`.
    pub h: DenseMatrix,
    /// Loss gradients with respect to the logits, `M x C`.
    pub p: DenseMatrix,
    /// Per-example losses.
    pub losses: Vec<f64>,
}

impl BatchTape {
    pub fn new(h: DenseMatrix, p: DenseMatrix, losses: Vec<f64>) -> Result<Self> {
        if h.rows() != p.rows() || h.rows() != losses.len() {
            return Err(Error::dims(format!(
                "tape rows disagree: H has {}, P has {}, losses has {}",
                h.rows(),
                p.rows(),
                losses.len()
            )));
        }
        if losses.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("losses"));
        }
        Ok(Self { h, p, losses })
    }

    #[inline]
    pub fn batch_size(&self) -> usize {
        self.h.rows()
    }

    #[inline]
    pub fn input_width(&self) -> usize {
        self.h.cols()
    }

    #[inline]
    pub fn output_width(&self) -> usize {
        self.p.cols()
    }
}

/// Symmetric `M x M` matrix of gradient inner products.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix(DenseMatrix);

impl GramMatrix {
    /// Wraps a square matrix; only checks shape. Symmetry is the caller's
    /// responsibility.
    pub fn from_dense(k: DenseMatrix) -> Result<Self> {
        if k.rows() != k.cols() {
            return Err(Error::dims(format!(
                "Gram matrix must be square, got {}x{}",
                k.rows(),
                k.cols()
            )));
        }
        Ok(Self(k))
    }

    /// Gram matrix of the rows of `atoms`.
    pub fn of_rows(atoms: &DenseMatrix) -> Self {
        let n = atoms.rows();
        let mut k = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot(atoms.row(i), atoms.row(j));
                k.set(i, j, v);
                k.set(j, i, v);
            }
        }
        Self(k)
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.0.rows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn as_dense(&self) -> &DenseMatrix {
        &self.0
    }
}

/// `K = (H H^T) o (P P^T) + P P^T`.
pub fn gram_implicit(tape: &BatchTape) -> GramMatrix {
    gram_implicit_with(tape, true)
}

/// [`gram_implicit`], optionally dropping the `P P^T` bias term for heads
/// without a bias vector.
pub fn gram_implicit_with(tape: &BatchTape, with_bias: bool) -> GramMatrix {
    let m = tape.batch_size();
    let mut k = DenseMatrix::zeros(m, m);
    for i in 0..m {
        let (hi, pi) = (tape.h.row(i), tape.p.row(i));
        for j in i..m {
            let pp = dot(pi, tape.p.row(j));
            let hh = dot(hi, tape.h.row(j));
            let v = if with_bias { hh * pp + pp } else { hh * pp };
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    GramMatrix(k)
}

/// Explicit last-layer gradients, one row per example:
/// `[vec(p_i h_i^T) ; p_i]` with `vec` in row-major (`C x D`) order, matching
/// the layout of the weight matrix `W`. Length `C*D + C` (or `C*D` without
/// bias).
pub fn last_layer_gradients(tape: &BatchTape, with_bias: bool) -> DenseMatrix {
    let (m, d, c) = (tape.batch_size(), tape.input_width(), tape.output_width());
    let width = c * d + if with_bias { c } else { 0 };
    let mut g = DenseMatrix::zeros(m, width);
    for i in 0..m {
        let (h, p) = (tape.h.row(i), tape.p.row(i));
        let row = g.row_mut(i);
        for (ci, &pc) in p.iter().enumerate() {
            for (di, &hd) in h.iter().enumerate() {
                row[ci * d + di] = pc * hd;
            }
        }
        if with_bias {
            row[c * d..].copy_from_slice(p);
        }
    }
    g
}

/// Gram matrix of the explicitly materialized last-layer gradients.
pub fn gram_explicit(tape: &BatchTape) -> GramMatrix {
    gram_explicit_with(tape, true)
}

pub fn gram_explicit_with(tape: &BatchTape, with_bias: bool) -> GramMatrix {
    GramMatrix::of_rows(&last_layer_gradients(tape, with_bias))
}

/// Row means of `K`: `t_i = (1/M) sum_j K_ij`, i.e. each gradient's inner
/// product with the batch-mean gradient.
pub fn mean_correlations(k: &GramMatrix) -> Vec<f64> {
    let m = k.size();
    let inv = 1.0 / m as f64;
    (0..m).map(|i| k.row(i).iter().sum::<f64>() * inv).collect()
}
