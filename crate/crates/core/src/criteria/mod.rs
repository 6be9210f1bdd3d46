//! Selection criteria: unbiased risk estimate, marginal likelihood and oracle loss.

pub mod mle;
pub mod oracle;
pub mod quadratic;
pub mod ure;
pub mod value;
pub mod weights;

pub use mle::{marginal_neg_loglik, mle_from_solve, mle_quadratic};
pub use oracle::oracle_quadratic;
pub use quadratic::{LocationQuadratic, Minimizer};
pub use ure::{ure, ure_from_solve, ure_quadratic};
pub use value::{Components, Criterion, CriterionValue, TraceInfo};
pub use weights::{compound_loss, WeightSpec};

#[cfg(test)]
mod tests;
