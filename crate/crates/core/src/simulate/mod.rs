//! Monte Carlo designs for matched panels with assortative matching and limited
//! mobility, and the experiment harness comparing estimators on them.

pub mod design;
pub mod experiment;
pub mod metrics;

pub use design::{generate_design, restrict_to_largest, DesignParams, EffectDist, SimulatedPanel};
pub use experiment::{
    rep_seed, run_experiment, run_replication, EstimatorOutcome, EstimatorSummary, ExperimentConfig, ExperimentReport,
    RepFailure, SimEstimator, SimReplication,
};
pub use metrics::{empirical_moments, median, quantile, quintile_crosstab, scatter_points, Moments, ScatterPoint};
