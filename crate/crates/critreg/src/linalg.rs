//! Small dense linear algebra kernel: row-major matrices, matrix products,
//! a partially pivoted LU solve, and a power-iteration spectral norm.
//!
//! The LU routine treats a pivot as singular only when it is exactly zero.
//! That is deliberate: Newton systems in this crate can carry diagonal
//! entries as small as `alpha * psi''(x)` with `alpha` near 1e-16, and those
//! systems are perfectly well conditioned after row scaling. A magnitude
//! threshold would silently destroy the small-`alpha` dynamics.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds from nested rows, rejecting ragged or empty input.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::param("rows", "matrix dimensions must be positive"));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in &rows {
            if r.len() != cols {
                return Err(Error::param("rows", "ragged rows"));
            }
            data.extend_from_slice(r);
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("DenseMatrix::from_rows"));
        }
        Ok(DenseMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DenseMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `A x` for a slice of length `cols`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec: length mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect()
    }

    /// `A^T y` for a slice of length `rows`.
    pub fn matvec_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "matvec_transpose: length mismatch");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let yi = y[i];
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += yi * a;
            }
        }
        out
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul: inner dimension mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.at(i, k);
                if aik == 0.0 {
                    continue;
                }
                let orow = other.row(k).to_vec();
                let target = out.row_mut(i);
                for (t, b) in target.iter_mut().zip(&orow) {
                    *t += aik * b;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.at(j, i))
    }

    /// `A^T A`, the Gram matrix of the columns.
    pub fn gram(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.cols);
        for r in 0..self.rows {
            let row = self.row(r).to_vec();
            for (j, &aj) in row.iter().enumerate() {
                if aj == 0.0 {
                    continue;
                }
                let target = out.row_mut(j);
                for (t, &ak) in target.iter_mut().zip(&row) {
                    *t += aj * ak;
                }
            }
        }
        out
    }

    /// Adds `values[i]` to the `i`-th diagonal entry.
    pub fn add_diagonal(&mut self, values: &[f64]) {
        assert_eq!(self.rows, self.cols, "add_diagonal: square only");
        assert_eq!(values.len(), self.rows, "add_diagonal: length mismatch");
        for (i, v) in values.iter().enumerate() {
            self.data[i * self.cols + i] += v;
        }
    }

    pub fn add_scaled_identity(&mut self, mu: f64) {
        assert_eq!(self.rows, self.cols, "add_scaled_identity: square only");
        for i in 0..self.rows {
            self.data[i * self.cols + i] += mu;
        }
    }

    pub fn trace(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "trace: square only");
        (0..self.rows).map(|i| self.at(i, i)).sum()
    }

    /// Spectral norm `sigma_max(A)` via power iteration on `A^T A`.
    ///
    /// Deterministic start vector; the small index-dependent tilt avoids
    /// starting orthogonal to the leading eigenvector on structured input.
    pub fn operator_norm(&self) -> f64 {
        let n = self.cols;
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64) / (n as f64 + 1.0)).collect();
        normalize(&mut v);
        let mut lambda = 0.0_f64;
        for _ in 0..2000 {
            let mut w = self.matvec_transpose(&self.matvec(&v));
            let next = norm(&w);
            if next == 0.0 {
                return 0.0;
            }
            normalize(&mut w);
            v = w;
            if (next - lambda).abs() <= 1e-13 * next {
                lambda = next;
                break;
            }
            lambda = next;
        }
        lambda.sqrt()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

/// Solves `A x = b` by LU with partial pivoting.
///
/// Returns `None` only when a pivot is exactly zero. Callers that want a
/// regularized retry add a diagonal shift themselves.
pub fn solve_lu(a: &DenseMatrix, b: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(a.rows(), a.cols(), "solve_lu: square only");
    assert_eq!(b.len(), a.rows(), "solve_lu: rhs length mismatch");
    let n = a.rows();
    let mut lu = a.data.clone();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let mut p = k;
        let mut best = lu[k * n + k].abs();
        for i in (k + 1)..n {
            let cand = lu[i * n + k].abs();
            if cand > best {
                best = cand;
                p = i;
            }
        }
        if lu[p * n + k] == 0.0 {
            return None;
        }
        if p != k {
            for j in 0..n {
                lu.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
        }
        let pivot = lu[k * n + k];
        for i in (k + 1)..n {
            let f = lu[i * n + k] / pivot;
            lu[i * n + k] = f;
            if f == 0.0 {
                continue;
            }
            let (upper, lower) = lu.split_at_mut(i * n);
            let krow = &upper[k * n + k + 1..k * n + n];
            let irow = &mut lower[k + 1..n];
            for (x, y) in irow.iter_mut().zip(krow) {
                *x -= f * y;
            }
        }
    }

    // Forward substitution on the permuted right-hand side.
    let mut x: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
    for i in 1..n {
        let mut s = x[i];
        for j in 0..i {
            s -= lu[i * n + j] * x[j];
        }
        x[i] = s;
    }
    // Back substitution.
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s -= lu[i * n + j] * x[j];
        }
        x[i] = s / lu[i * n + i];
    }
    Some(x)
}
