//! Small dense linear algebra: a row-major matrix type, an incrementally
//! grown lower Cholesky factor and the triangular solves that go with it.

use std::fmt;

use crate::error::{Error, Result};

/// Default relative pivot tolerance for [`LowerCholesky::append`].
pub const PIVOT_TOL: f64 = 1e-12;

#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Wraps row-major `data`; rejects a length mismatch or any NaN/Inf.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix data"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::dims(format!("row {i} has {} entries, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// New matrix made of the given rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self::from_vec_unchecked(idx.len(), self.cols, data)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::dims(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::dims(format!(
                "matrix has {} columns, vector has {} entries",
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-triangular Cholesky factor `L` of a symmetric positive definite
/// matrix, grown one row/column at a time. Stored packed by rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LowerCholesky {
    order: usize,
    packed: Vec<f64>,
}

impl LowerCholesky {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(order: usize) -> Self {
        Self {
            order: 0,
            packed: Vec::with_capacity(order * (order + 1) / 2),
        }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    /// Entry `L[i][j]`; zero above the diagonal.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.packed[i * (i + 1) / 2 + j]
        }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.packed[start..start + i + 1]
    }

    /// Factors a full SPD matrix by appending its columns one by one.
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::dims("Cholesky of a non-square matrix"));
        }
        let mut chol = Self::with_capacity(a.rows());
        for k in 0..a.rows() {
            chol.append(&a.row(k)[..k], a.get(k, k), PIVOT_TOL)?;
        }
        Ok(chol)
    }

    /// Borders the factored matrix with one new row/column.
    ///
    /// `cross` holds the entries between the new index and the `order()`
    /// existing ones, `diag` the new diagonal entry. The existing block of
    /// the factor is left untouched. Fails with [`Error::SingularUpdate`]
    /// when the new pivot `diag - |w|^2` is at most `rel_tol * diag`, where
    /// `w = L^{-1} cross`.
    pub fn append(&mut self, cross: &[f64], diag: f64, rel_tol: f64) -> Result<()> {
        let k = self.order;
        if cross.len() != k {
            return Err(Error::dims(format!(
                "factor has order {k}, cross vector has {} entries",
                cross.len()
            )));
        }
        if !diag.is_finite() || cross.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Cholesky update"));
        }
        let w = self.forward_solve(cross);
        let pivot = diag - dot(&w, &w);
        let tolerance = rel_tol * diag.abs();
        if pivot <= tolerance {
            return Err(Error::SingularUpdate { pivot, tolerance });
        }
        self.packed.extend_from_slice(&w);
        self.packed.push(pivot.sqrt());
        self.order += 1;
        Ok(())
    }

    /// Solves `L x = b`.
    fn forward_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(b.len());
        for (i, &bi) in b.iter().enumerate() {
            let row = self.row(i);
            let s = bi - dot(&row[..i], &x);
            x.push(s / row[i]);
        }
        x
    }

    /// Solves `L^T x = b` in place.
    fn backward_solve(&self, x: &mut [f64]) {
        for i in (0..self.order).rev() {
            let xi = x[i] / self.get(i, i);
            x[i] = xi;
            let row = self.row(i);
            for j in 0..i {
                x[j] -= row[j] * xi;
            }
        }
    }

    /// Solves `(L L^T) x = rhs` by forward then backward substitution.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.order {
            return Err(Error::dims(format!(
                "factor has order {}, right-hand side has {} entries",
                self.order,
                rhs.len()
            )));
        }
        let mut x = self.forward_solve(rhs);
        self.backward_solve(&mut x);
        Ok(x)
    }

    /// The full square lower factor.
    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.order;
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.row_mut(i)[..=i].copy_from_slice(self.row(i));
        }
        m
    }

    /// `L L^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.order;
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = dot(&self.row(i)[..=j], &self.row(j)[..=j]);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }
}

/// Appends `(cross, diag)` to a copy of `chol`.
pub fn cholesky_append(chol: &LowerCholesky, cross: &[f64], diag: f64) -> Result<LowerCholesky> {
    let mut next = chol.clone();
    next.append(cross, diag, PIVOT_TOL)?;
    Ok(next)
}

pub fn solve_posdef(chol: &LowerCholesky, rhs: &[f64]) -> Result<Vec<f64>> {
    chol.solve(rhs)
}
