//! Compiles every chapter of the guide as documentation so `cargo test
//! --doc` runs the book's code blocks against the real crate. A snippet
//! that drifts from the API fails the build here, not on a reader.

#![cfg(doctest)]

#[doc = include_str!("../../../README.md")]
mod readme {}

#[doc = include_str!("../../../book/src/overview.md")]
mod overview {}

#[doc = include_str!("../../../book/src/operators.md")]
mod operators {}

#[doc = include_str!("../../../book/src/discrepancy.md")]
mod discrepancy {}

#[doc = include_str!("../../../book/src/relative-subgradients.md")]
mod relative_subgradients {}

#[doc = include_str!("../../../book/src/regularizers.md")]
mod regularizers {}

#[doc = include_str!("../../../book/src/networks.md")]
mod networks {}

#[doc = include_str!("../../../book/src/solvers.md")]
mod solvers {}

#[doc = include_str!("../../../book/src/analysis.md")]
mod analysis {}

#[doc = include_str!("../../../book/src/studies.md")]
mod studies {}
