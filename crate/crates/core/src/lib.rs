//! Empirical Bayes estimation of two-way fixed effects in matched panel data.
//!
//! Row units (e.g. students, workers) carry effects `alpha`, column units (teachers,
//! firms) carry effects `beta`, normalized so that `sum(beta) = 0`. Vectors over all
//! units are laid out as `(alpha, beta)`.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod error;
pub mod estimators;
pub mod graph;
pub mod hyperopt;
pub mod simulate;
pub mod sparse_linalg;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result, Side};
