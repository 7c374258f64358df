//! Orthogonal matching pursuit.
//!
//! [`omp_gram`] runs entirely on the Gram matrix `K = A A^T` of the atoms and
//! the correlation vector `t = A b`, maintaining a Cholesky factor of the
//! active sub-Gram `K[I, I]` that grows by one row per selected atom.
//! [`omp_dense_oracle`] is the textbook version on explicit vectors with a
//! fresh QR least-squares refit per step; it exists to check the Gram
//! variant.

use crate::error::{Error, Result};
use crate::gram::GramMatrix;
use crate::linalg::{dot, DenseMatrix, LowerCholesky, PIVOT_TOL};

/// A weighted subset of a minibatch.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Selection {
    /// Checks distinct, in-range indices and matching non-empty weights.
    pub fn new(indices: Vec<usize>, weights: Vec<f64>, batch_size: usize) -> Result<Self> {
        if indices.is_empty() || indices.len() != weights.len() {
            return Err(Error::dims(format!(
                "selection has {} indices and {} weights",
                indices.len(),
                weights.len()
            )));
        }
        let mut seen = vec![false; batch_size];
        for &i in &indices {
            if i >= batch_size || std::mem::replace(&mut seen[i], true) {
                return Err(Error::dims(format!(
                    "selection index {i} repeated or outside batch of {batch_size}"
                )));
            }
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("selection weights"));
        }
        Ok(Self { indices, weights })
    }

    /// Every index of a batch with unit weight.
    pub fn full(batch_size: usize) -> Self {
        Self {
            indices: (0..batch_size).collect(),
            weights: vec![1.0; batch_size],
        }
    }

    pub fn unit(indices: Vec<usize>) -> Self {
        let weights = vec![1.0; indices.len()];
        Self { indices, weights }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OmpConfig {
    pub max_atoms: usize,
    /// Stop once the best available correlation is at or below this.
    pub residual_tol: f64,
    /// Relative pivot tolerance for the Cholesky update.
    pub pivot_tol: f64,
    /// Rank atoms by `|alpha_k|` instead of the raw correlation.
    pub abs_correlation: bool,
}

impl OmpConfig {
    pub fn new(max_atoms: usize) -> Self {
        Self {
            max_atoms,
            residual_tol: 0.0,
            pivot_tol: PIVOT_TOL,
            abs_correlation: false,
        }
    }

    fn validate(&self, size: usize) -> Result<()> {
        if self.max_atoms == 0 || self.max_atoms > size {
            return Err(Error::InvalidConfig(format!(
                "max_atoms must be in 1..={size}, got {}",
                self.max_atoms
            )));
        }
        if !(self.residual_tol >= 0.0) || !(self.pivot_tol >= 0.0) {
            return Err(Error::InvalidConfig("OMP tolerances must be non-negative".into()));
        }
        Ok(())
    }

    fn score(&self, alpha: f64) -> f64 {
        if self.abs_correlation {
            alpha.abs()
        } else {
            alpha
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// `max_atoms` atoms are active.
    MaxAtoms,
    /// No remaining atom correlates with the residual above tolerance.
    Correlation,
    /// The best atom is numerically in the span of the active set.
    Singular,
}

/// Lowest-index argmax of `score(alpha_k)` over inactive atoms.
fn best_atom(alpha: &[f64], active: &[bool], cfg: &OmpConfig) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &a) in alpha.iter().enumerate() {
        if active[k] {
            continue;
        }
        let s = cfg.score(a);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((k, s));
        }
    }
    best
}

/// Gram-variant OMP, one atom per [`advance`](GramPursuit::advance).
///
/// Keeps `alpha = t - K[:, I] gamma`, the correlations of every atom with
/// the current residual, and refits `gamma = K[I, I]^{-1} t[I]` through the
/// incrementally grown Cholesky factor.
pub struct GramPursuit<'a> {
    k: &'a GramMatrix,
    t: &'a [f64],
    cfg: OmpConfig,
    chol: LowerCholesky,
    indices: Vec<usize>,
    active: Vec<bool>,
    t_active: Vec<f64>,
    gamma: Vec<f64>,
    alpha: Vec<f64>,
    stop: Option<StopReason>,
    last_score: f64,
}

impl<'a> GramPursuit<'a> {
    pub fn new(k: &'a GramMatrix, t: &'a [f64], cfg: OmpConfig) -> Result<Self> {
        let size = k.size();
        if t.len() != size {
            return Err(Error::dims(format!(
                "Gram matrix is {size}x{size}, target has {} entries",
                t.len()
            )));
        }
        cfg.validate(size)?;
        Ok(Self {
            k,
            t,
            chol: LowerCholesky::with_capacity(cfg.max_atoms),
            cfg,
            indices: Vec::new(),
            active: vec![false; size],
            t_active: Vec::new(),
            gamma: Vec::new(),
            alpha: t.to_vec(),
            stop: None,
            last_score: f64::NAN,
        })
    }

    /// Adds the next atom and refits. Returns its index, or `None` once the
    /// pursuit has stopped.
    pub fn advance(&mut self) -> Option<usize> {
        if self.stop.is_some() {
            return None;
        }
        if self.indices.len() >= self.cfg.max_atoms {
            self.stop = Some(StopReason::MaxAtoms);
            return None;
        }
        let Some((k, score)) = best_atom(&self.alpha, &self.active, &self.cfg) else {
            self.stop = Some(StopReason::MaxAtoms);
            return None;
        };
        self.last_score = score;
        if !(score > self.cfg.residual_tol) {
            self.stop = Some(StopReason::Correlation);
            return None;
        }

        let row = self.k.row(k);
        let cross: Vec<f64> = self.indices.iter().map(|&j| row[j]).collect();
        if self.chol.append(&cross, row[k], self.cfg.pivot_tol).is_err() {
            self.stop = Some(StopReason::Singular);
            return None;
        }
        self.indices.push(k);
        self.active[k] = true;
        self.t_active.push(self.t[k]);
        self.gamma = self
            .chol
            .solve(&self.t_active)
            .expect("factor order tracks the active set");

        for (i, a) in self.alpha.iter_mut().enumerate() {
            let row = self.k.row(i);
            let fit: f64 = self.indices.iter().zip(&self.gamma).map(|(&j, &g)| row[j] * g).sum();
            *a = self.t[i] - fit;
        }
        Some(k)
    }

    pub fn run(&mut self) {
        while self.advance().is_some() {}
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.gamma
    }

    /// Residual correlations `t - K[:, I] gamma`.
    pub fn correlations(&self) -> &[f64] {
        &self.alpha
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stop
    }

    pub fn selection(&self) -> Result<Selection> {
        if self.indices.is_empty() {
            return Err(Error::EmptySelection {
                max_correlation: self.last_score,
            });
        }
        Ok(Selection {
            indices: self.indices.clone(),
            weights: self.gamma.clone(),
        })
    }
}

/// Greedy Gram OMP. Returns the raw (unnormalized) weights; may return
/// fewer than `max_atoms` atoms when the pursuit stops early.
pub fn omp_gram(k: &GramMatrix, t: &[f64], cfg: &OmpConfig) -> Result<Selection> {
    let mut pursuit = GramPursuit::new(k, t, cfg.clone())?;
    pursuit.run();
    pursuit.selection()
}

/// Reference OMP on explicit atoms (rows of `atoms`) and target vector.
///
/// Same selection rule and stopping rules as [`omp_gram`]; the refit uses
/// modified Gram-Schmidt with reorthogonalization, and the singularity test
/// compares the squared norm of the orthogonalized atom against
/// `pivot_tol * |a_k|^2`.
pub fn omp_dense_oracle(atoms: &DenseMatrix, target: &[f64], cfg: &OmpConfig) -> Result<Selection> {
    let (n, dim) = (atoms.rows(), atoms.cols());
    if target.len() != dim {
        return Err(Error::dims(format!(
            "atoms have dimension {dim}, target has {}",
            target.len()
        )));
    }
    cfg.validate(n)?;

    let mut indices: Vec<usize> = Vec::new();
    let mut active = vec![false; n];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    // Column j of R holds the coefficients of atom I[j] on basis[0..=j].
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut gamma: Vec<f64> = Vec::new();
    let mut residual = target.to_vec();
    let mut last_score = f64::NAN;

    while indices.len() < cfg.max_atoms {
        let corr: Vec<f64> = (0..n).map(|i| dot(atoms.row(i), &residual)).collect();
        let Some((k, score)) = best_atom(&corr, &active, cfg) else {
            break;
        };
        last_score = score;
        if !(score > cfg.residual_tol) {
            break;
        }

        let a = atoms.row(k);
        let mut v = a.to_vec();
        let mut coeffs = vec![0.0; basis.len()];
        for _ in 0..2 {
            for (q, c) in basis.iter().zip(coeffs.iter_mut()) {
                let proj = dot(q, &v);
                *c += proj;
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
        }
        let nv2 = dot(&v, &v);
        if nv2 <= cfg.pivot_tol * dot(a, a) {
            break;
        }
        let nv = nv2.sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        coeffs.push(nv);
        basis.push(v);
        r_cols.push(coeffs);
        indices.push(k);
        active[k] = true;

        // gamma = R^{-1} Q^T b
        let qb: Vec<f64> = basis.iter().map(|q| dot(q, target)).collect();
        let s = indices.len();
        gamma = vec![0.0; s];
        for i in (0..s).rev() {
            let mut acc = qb[i];
            for j in i + 1..s {
                acc -= r_cols[j][i] * gamma[j];
            }
            gamma[i] = acc / r_cols[i][i];
        }

        residual.copy_from_slice(target);
        for (&j, &g) in indices.iter().zip(&gamma) {
            for (r, x) in residual.iter_mut().zip(atoms.row(j)) {
                *r -= g * x;
            }
        }
    }

    if indices.is_empty() {
        return Err(Error::EmptySelection {
            max_correlation: last_score,
        });
    }
    Ok(Selection {
        indices,
        weights: gamma,
    })
}

/// `|sum_i gamma_i g_i - b|^2` from inner products only:
/// `gamma^T K[I,I] gamma - 2 gamma^T t[I] + t0`, where `t0 = |b|^2`.
pub fn residual_norm_sq(k: &GramMatrix, t: &[f64], t0: f64, sel: &Selection) -> f64 {
    let mut quad = 0.0;
    let mut lin = 0.0;
    for (&i, &gi) in sel.indices.iter().zip(&sel.weights) {
        let row = k.row(i);
        let inner: f64 = sel.indices.iter().zip(&sel.weights).map(|(&j, &gj)| row[j] * gj).sum();
        quad += gi * inner;
        lin += gi * t[i];
    }
    quad - 2.0 * lin + t0
}
