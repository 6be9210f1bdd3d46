//! Grid search over the prior hyperparameters with the location concentrated out.

pub mod concentrate;
pub mod grid;
pub mod select;

pub use concentrate::{concentrate_delta_mle, concentrate_delta_ure, concentrate_mu_mle, concentrate_mu_ure, concentrate_oracle};
pub use grid::{lin_space, log_space, GridSpec, MuHandling};
pub use select::{oracle_loss_curve, select, select_many, select_oracle, PointFailure, SelectionResult, SurfacePoint};

#[cfg(test)]
mod tests;
