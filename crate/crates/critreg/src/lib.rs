//! Critical-point regularization for linear inverse problems.
//!
//! This crate solves ill-posed linear problems `K x = y` by Tikhonov
//! functionals `(1/p) ||K x - y||^p + alpha R(x)` whose penalty `R` may be
//! non-convex: quartic double wells, piecewise-quadratic wells, or squared
//! norms of ReLU networks. Because such functionals rarely admit global
//! minimizers that one can certify, the solvers target critical points
//! instead, and the supporting theory is tracked through relative
//! subgradients: affine minorants that are allowed to err by a bound
//! `phi(u)` charged at the comparison point.
//!
//! The pieces:
//!
//! * [`vector`] and [`operator`]: vectors, forward operators and adjoints.
//! * [`discrepancy`]: norm-power misfit terms.
//! * [`regularizers`]: the penalty zoo and its subgradient selections.
//! * [`network`]: ReLU networks as quasi-homogeneous maps.
//! * [`solvers`]: relative subgradient descent, accelerated gradient and
//!   damped Newton iterations, with inexactness certificates.
//! * [`analysis`]: closed-form critical points and the ellipsoid geometry
//!   of the convex case.
//! * [`experiments`]: the reproducible study harness behind the CLI.
//!
//! ```
//! use critreg::operator::LinearForwardOperator;
//! use critreg::vector::RealVector;
//!
//! let k = LinearForwardOperator::cumulative_sum(3)?;
//! let x = RealVector::new(vec![1.0, 2.0, 3.0])?;
//! assert_eq!(k.apply(&x)?.as_slice(), &[1.0, 3.0, 6.0]);
//! # Ok::<(), critreg::error::Error>(())
//! ```

pub mod analysis;
pub mod discrepancy;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod network;
pub mod operator;
pub mod regularizers;
pub mod rng;
pub mod selftest;
pub mod solvers;
pub mod svg;
pub mod vector;

mod booktests;

pub use error::{Error, Result};
pub use operator::LinearForwardOperator;
pub use vector::RealVector;
