//! Dense real vectors over `f64`.
//!
//! Every public constructor rejects empty and non-finite input, so a
//! `RealVector` obtained from outside the crate always has positive length
//! and finite entries. Internal arithmetic does not re-validate; solvers
//! check finiteness of objective values instead and report divergence
//! through [`crate::error::Error::Divergence`].

use crate::error::{Error, Result};

/// A finite-dimensional real vector.
#[derive(Clone, Debug, PartialEq)]
pub struct RealVector {
    entries: Vec<f64>,
}

impl RealVector {
    /// Wraps `entries`, rejecting empty vectors and non-finite values.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::param("entries", "vector length must be positive"));
        }
        if !entries.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("RealVector::new"));
        }
        Ok(RealVector { entries })
    }

    /// The zero vector of length `n`. Panics if `n == 0`.
    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "vector length must be positive");
        RealVector {
            entries: vec![0.0; n],
        }
    }

    /// Constant vector of length `n`.
    pub fn constant(n: usize, value: f64) -> Self {
        assert!(n > 0, "vector length must be positive");
        RealVector {
            entries: vec![value; n],
        }
    }

    /// Builds entry `i` as `f(i)`.
    pub fn from_fn(n: usize, f: impl FnMut(usize) -> f64) -> Self {
        assert!(n > 0, "vector length must be positive");
        RealVector {
            entries: (0..n).map(f).collect(),
        }
    }

    /// The `i`-th standard basis vector in dimension `n`.
    pub fn standard_basis(n: usize, i: usize) -> Self {
        assert!(i < n, "basis index out of range");
        let mut e = RealVector::zeros(n);
        e.entries[i] = 1.0;
        e
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Length is at least one by construction, so this is always false for
    /// vectors built through public constructors.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.entries.iter()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.entries.clone()
    }

    /// True when every entry is finite.
    pub fn is_all_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }

    /// Euclidean inner product. Panics on length mismatch; operator and
    /// solver entry points validate dimensions before reaching this.
    pub fn dot(&self, other: &RealVector) -> f64 {
        assert_eq!(self.len(), other.len(), "dot: length mismatch");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Max-norm.
    pub fn norm_inf(&self) -> f64 {
        self.entries.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn add(&self, other: &RealVector) -> RealVector {
        assert_eq!(self.len(), other.len(), "add: length mismatch");
        RealVector {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &RealVector) -> RealVector {
        assert_eq!(self.len(), other.len(), "sub: length mismatch");
        RealVector {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> RealVector {
        RealVector {
            entries: self.entries.iter().map(|a| c * a).collect(),
        }
    }

    /// `self + c * other`, the workhorse of every iterative scheme here.
    pub fn add_scaled(&self, c: f64, other: &RealVector) -> RealVector {
        assert_eq!(self.len(), other.len(), "add_scaled: length mismatch");
        RealVector {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }

    /// Replaces entry `i`. Panics when out of range.
    pub fn set(&mut self, i: usize, value: f64) {
        self.entries[i] = value;
    }
}

impl std::ops::Index<usize> for RealVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.entries[i]
    }
}

impl AsRef<[f64]> for RealVector {
    fn as_ref(&self) -> &[f64] {
        &self.entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(RealVector::new(vec![]).is_err());
        assert!(RealVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(RealVector::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(RealVector::new(vec![1.0, -2.5]).is_ok());
    }

    #[test]
    fn basic_arithmetic() {
        let a = RealVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        let b = RealVector::new(vec![4.0, 5.0, 6.0]).unwrap();
        assert_eq!(a.dot(&b), 32.0);
        assert_eq!(a.add(&b).as_slice(), &[5.0, 7.0, 9.0]);
        assert_eq!(b.sub(&a).as_slice(), &[3.0, 3.0, 3.0]);
        assert_eq!(a.add_scaled(2.0, &b).as_slice(), &[9.0, 12.0, 15.0]);
        assert_eq!(a.norm_inf(), 3.0);
        assert_eq!(RealVector::standard_basis(3, 1).as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn norm_of_three_four() {
        let v = RealVector::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(v.norm(), 5.0);
    }
}
