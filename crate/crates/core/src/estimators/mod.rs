//! Point estimators of `(alpha, beta)`: restricted least squares, the shrinkage
//! family, one-way special cases and covariate handling.

pub mod covariates;
pub mod hyperparams;
pub mod ls;
pub mod oneway;
pub mod posterior;
pub mod problem;
pub mod result;

pub use covariates::{partial_out_covariates, CovariateMode};
pub use hyperparams::{Hyperparams, Precision, PriorLocation};
pub use ls::{ls_estimate, sigma2_estimate, sigma2_from_fit};
pub use oneway::{column_means, moment_lambda_b, mu_j, one_way_fit, one_way_shrink, one_way_sigma2, projected_one_way_shrink};
pub use posterior::{location_vector, posterior_mean};
pub use problem::{Needs, PointSolve, ProblemOptions, ShrinkageProblem, TraceBackend};
pub use result::{EstimateResult, SolverDiagnostics};
