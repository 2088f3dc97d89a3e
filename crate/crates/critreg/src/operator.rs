//! Bounded linear forward operators between finite-dimensional spaces.
//!
//! Four variants cover the problems treated here: pointwise scaling,
//! subsampling (inpainting masks), the cumulative-sum operator (a discrete
//! Volterra integration), and a general dense matrix. `apply` and
//! `adjoint_apply` are exact transposes of each other up to floating-point
//! rounding, which is the invariant everything downstream leans on.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::vector::RealVector;

/// Error-free sum: `a + b = s + e` exactly, with `s = fl(a + b)`.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bv = s - a;
    let e = (a - (s - bv)) + (b - bv);
    (s, e)
}

/// A linear map `K: R^domain -> R^range` with an explicit adjoint.
#[derive(Clone, Debug)]
pub enum LinearForwardOperator {
    /// `(K x)_i = d_i x_i`. Self-adjoint; singular when some `d_i = 0`.
    Diagonal { diag: RealVector },
    /// Keeps the listed coordinates, in order: `(K x)_j = x[kept[j]]`.
    Mask { domain_dim: usize, kept: Vec<usize> },
    /// `(K x)_i = sum_{j <= i} x_j`. Injective, badly conditioned.
    CumulativeSum { dim: usize },
    /// Arbitrary dense matrix, rows index the range.
    Dense { matrix: DenseMatrix },
}

impl LinearForwardOperator {
    pub fn diagonal(diag: RealVector) -> Self {
        LinearForwardOperator::Diagonal { diag }
    }

    /// Builds a subsampling mask. `kept` must be strictly increasing,
    /// non-empty, and within `0..domain_dim`.
    pub fn mask(domain_dim: usize, kept: Vec<usize>) -> Result<Self> {
        if domain_dim == 0 {
            return Err(Error::param("domain_dim", "must be positive"));
        }
        if kept.is_empty() {
            return Err(Error::param("kept", "mask must keep at least one index"));
        }
        for w in kept.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::param("kept", "indices must be strictly increasing"));
            }
        }
        if *kept.last().unwrap() >= domain_dim {
            return Err(Error::param("kept", "index out of range"));
        }
        Ok(LinearForwardOperator::Mask { domain_dim, kept })
    }

    pub fn cumulative_sum(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be positive"));
        }
        Ok(LinearForwardOperator::CumulativeSum { dim })
    }

    pub fn dense(matrix: DenseMatrix) -> Self {
        LinearForwardOperator::Dense { matrix }
    }

    pub fn domain_dim(&self) -> usize {
        match self {
            LinearForwardOperator::Diagonal { diag } => diag.len(),
            LinearForwardOperator::Mask { domain_dim, .. } => *domain_dim,
            LinearForwardOperator::CumulativeSum { dim } => *dim,
            LinearForwardOperator::Dense { matrix } => matrix.cols(),
        }
    }

    pub fn range_dim(&self) -> usize {
        match self {
            LinearForwardOperator::Diagonal { diag } => diag.len(),
            LinearForwardOperator::Mask { kept, .. } => kept.len(),
            LinearForwardOperator::CumulativeSum { dim } => *dim,
            LinearForwardOperator::Dense { matrix } => matrix.rows(),
        }
    }

    /// Forward application `K x`.
    pub fn apply(&self, x: &RealVector) -> Result<RealVector> {
        if x.len() != self.domain_dim() {
            return Err(Error::dim("apply", self.domain_dim(), x.len()));
        }
        let out = match self {
            LinearForwardOperator::Diagonal { diag } => x
                .iter()
                .zip(diag.iter())
                .map(|(xi, di)| di * xi)
                .collect::<Vec<_>>(),
            LinearForwardOperator::Mask { kept, .. } => {
                kept.iter().map(|&i| x[i]).collect::<Vec<_>>()
            }
            // Compensated running sum: the error term keeps every prefix
            // accurate to the last bit of its own magnitude, not n ulps.
            LinearForwardOperator::CumulativeSum { .. } => {
                let mut acc = 0.0;
                let mut comp = 0.0;
                x.iter()
                    .map(|&xi| {
                        let (s, e) = two_sum(acc, xi);
                        acc = s;
                        comp += e;
                        acc + comp
                    })
                    .collect::<Vec<_>>()
            }
            LinearForwardOperator::Dense { matrix } => matrix.matvec(x.as_slice()),
        };
        RealVector::new(out).map_err(|_| Error::NonFinite("apply"))
    }

    /// Adjoint application `K^* y` with respect to the Euclidean products.
    pub fn adjoint_apply(&self, y: &RealVector) -> Result<RealVector> {
        if y.len() != self.range_dim() {
            return Err(Error::dim("adjoint_apply", self.range_dim(), y.len()));
        }
        let out = match self {
            LinearForwardOperator::Diagonal { diag } => y
                .iter()
                .zip(diag.iter())
                .map(|(yi, di)| di * yi)
                .collect::<Vec<_>>(),
            LinearForwardOperator::Mask { domain_dim, kept } => {
                let mut out = vec![0.0; *domain_dim];
                for (j, &i) in kept.iter().enumerate() {
                    out[i] = y[j];
                }
                out
            }
            // (K^* y)_i = sum_{j >= i} y_j, a reversed running sum,
            // compensated like the forward pass.
            LinearForwardOperator::CumulativeSum { dim } => {
                let mut out = vec![0.0; *dim];
                let mut acc = 0.0;
                let mut comp = 0.0;
                for i in (0..*dim).rev() {
                    let (s, e) = two_sum(acc, y[i]);
                    acc = s;
                    comp += e;
                    out[i] = acc + comp;
                }
                out
            }
            LinearForwardOperator::Dense { matrix } => matrix.matvec_transpose(y.as_slice()),
        };
        RealVector::new(out).map_err(|_| Error::NonFinite("adjoint_apply"))
    }

    /// The residual `K x - y` in one pass.
    ///
    /// Equivalent to `apply` followed by subtraction, but for the
    /// cumulative sum the subtraction is folded into the compensated
    /// accumulation. That matters: prefix sums reach the scale of `y`
    /// while the residual is orders of magnitude smaller, so the naive
    /// route loses the residual's low bits to cancellation and puts a
    /// floor under every downstream gradient around `eps * ||y||`.
    pub fn residual(&self, x: &RealVector, y: &RealVector) -> Result<RealVector> {
        if x.len() != self.domain_dim() {
            return Err(Error::dim("residual", self.domain_dim(), x.len()));
        }
        if y.len() != self.range_dim() {
            return Err(Error::dim("residual", self.range_dim(), y.len()));
        }
        if let LinearForwardOperator::CumulativeSum { dim } = self {
            let mut out = vec![0.0; *dim];
            let mut acc = 0.0;
            let mut comp = 0.0;
            for i in 0..*dim {
                let (s, e) = two_sum(acc, x[i]);
                acc = s;
                comp += e;
                let (d, e2) = two_sum(acc, -y[i]);
                out[i] = d + (comp + e2);
            }
            return RealVector::new(out).map_err(|_| Error::NonFinite("residual"));
        }
        let kx = self.apply(x)?;
        Ok(kx.sub(y))
    }

    /// An orthonormal basis of `ker K` where one is available in closed
    /// form. Dense operators are rejected rather than silently rank-probed.
    pub fn kernel_basis(&self) -> Result<Vec<RealVector>> {
        let n = self.domain_dim();
        match self {
            LinearForwardOperator::Diagonal { diag } => Ok((0..n)
                .filter(|&i| diag[i] == 0.0)
                .map(|i| RealVector::standard_basis(n, i))
                .collect()),
            LinearForwardOperator::Mask { kept, .. } => {
                let mut out = Vec::new();
                let mut kept_iter = kept.iter().peekable();
                for i in 0..n {
                    if kept_iter.peek() == Some(&&i) {
                        kept_iter.next();
                    } else {
                        out.push(RealVector::standard_basis(n, i));
                    }
                }
                Ok(out)
            }
            LinearForwardOperator::CumulativeSum { .. } => Ok(Vec::new()),
            LinearForwardOperator::Dense { .. } => Err(Error::Unsupported(
                "kernel_basis is not available for dense operators".into(),
            )),
        }
    }

    /// Indices `i` with `e_i` in the kernel, for the variants that have a
    /// coordinate kernel. Convenience over [`Self::kernel_basis`].
    pub fn kernel_indices(&self) -> Result<Vec<usize>> {
        let basis = self.kernel_basis()?;
        Ok(basis
            .iter()
            .map(|e| {
                e.iter()
                    .position(|&v| v != 0.0)
                    .expect("kernel basis vectors are standard basis vectors")
            })
            .collect())
    }

    /// Materializes `K` as a dense matrix.
    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            LinearForwardOperator::Diagonal { diag } => {
                let n = diag.len();
                DenseMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 })
            }
            LinearForwardOperator::Mask { domain_dim, kept } => {
                DenseMatrix::from_fn(kept.len(), *domain_dim, |i, j| {
                    if kept[i] == j {
                        1.0
                    } else {
                        0.0
                    }
                })
            }
            LinearForwardOperator::CumulativeSum { dim } => {
                DenseMatrix::from_fn(*dim, *dim, |i, j| if j <= i { 1.0 } else { 0.0 })
            }
            LinearForwardOperator::Dense { matrix } => matrix.clone(),
        }
    }

    /// Materializes the normal matrix `K^* K` (domain by domain).
    ///
    /// Closed forms are used where they exist; for the cumulative sum,
    /// `(K^* K)_{ij} = n - max(i, j)` with zero-based indices.
    pub fn normal_matrix(&self) -> DenseMatrix {
        match self {
            LinearForwardOperator::Diagonal { diag } => {
                let n = diag.len();
                DenseMatrix::from_fn(n, n, |i, j| if i == j { diag[i] * diag[i] } else { 0.0 })
            }
            LinearForwardOperator::Mask { domain_dim, kept } => {
                let mut m = DenseMatrix::zeros(*domain_dim, *domain_dim);
                for &i in kept {
                    m.set(i, i, 1.0);
                }
                m
            }
            LinearForwardOperator::CumulativeSum { dim } => {
                let n = *dim;
                DenseMatrix::from_fn(n, n, |i, j| (n - i.max(j)) as f64)
            }
            LinearForwardOperator::Dense { matrix } => matrix.gram(),
        }
    }

    /// `||K^* K|| = sigma_max(K)^2`, exact for diagonal and mask variants,
    /// power iteration otherwise.
    pub fn normal_operator_norm(&self) -> f64 {
        match self {
            LinearForwardOperator::Diagonal { diag } => {
                let m = diag.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
                m * m
            }
            LinearForwardOperator::Mask { .. } => 1.0,
            _ => {
                let s = self.power_iteration_norm();
                s
            }
        }
    }

    fn power_iteration_norm(&self) -> f64 {
        let n = self.domain_dim();
        let mut v =
            RealVector::from_fn(n, |i| 1.0 + (i as f64) / (n as f64 + 1.0));
        let mut lambda = 0.0_f64;
        v = v.scale(1.0 / v.norm());
        for _ in 0..2000 {
            let w = self
                .adjoint_apply(&self.apply(&v).expect("dimension fixed"))
                .expect("dimension fixed");
            let next = w.norm();
            if next == 0.0 {
                return 0.0;
            }
            v = w.scale(1.0 / next);
            if (next - lambda).abs() <= 1e-13 * next {
                return next;
            }
            lambda = next;
        }
        lambda
    }
}
