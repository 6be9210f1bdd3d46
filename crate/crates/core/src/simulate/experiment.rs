use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::value::Criterion;
use crate::criteria::weights::{compound_loss, WeightSpec};
use crate::error::{Error, Result};
use crate::estimators::hyperparams::{Hyperparams, Precision};
use crate::estimators::oneway::one_way_fit;
use crate::estimators::problem::{ProblemOptions, ShrinkageProblem};
use crate::graph::bipartite::build_graph;
use crate::hyperopt::grid::GridSpec;
use crate::hyperopt::select::select_many;
use crate::simulate::design::{generate_design, restrict_to_largest, DesignParams};
use crate::simulate::metrics::{empirical_moments, median, quantile, scatter_points, Moments, ScatterPoint};
use crate::sparse_linalg::config::SolverConfig;

/// Estimators compared in a simulation experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SimEstimator {
    #[serde(rename = "ls")]
    Ls,
    #[serde(rename = "eb_ure")]
    EbUre,
    #[serde(rename = "eb_mle")]
    EbMle,
    /// Column effects shrunk by the moment precision, row effects ignored.
    #[serde(rename = "eb_1way")]
    EbOneWay,
    /// Hyperparameters chosen against the true effects.
    #[serde(rename = "ol")]
    Oracle,
}

impl SimEstimator {
    pub const ALL: [SimEstimator; 5] =
        [SimEstimator::Ls, SimEstimator::EbUre, SimEstimator::EbMle, SimEstimator::EbOneWay, SimEstimator::Oracle];

    pub fn name(&self) -> &'static str {
        match self {
            SimEstimator::Ls => "ls",
            SimEstimator::EbUre => "eb_ure",
            SimEstimator::EbMle => "eb_mle",
            SimEstimator::EbOneWay => "eb_1way",
            SimEstimator::Oracle => "ol",
        }
    }

    fn criterion(&self) -> Option<Criterion> {
        match self {
            SimEstimator::EbUre => Some(Criterion::Ure),
            SimEstimator::EbMle => Some(Criterion::Mle),
            SimEstimator::Oracle => Some(Criterion::Oracle),
            _ => None,
        }
    }
}

impl std::str::FromStr for SimEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SimEstimator::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown estimator {s:?}")))
    }
}

/// Settings of a Monte Carlo experiment. The master seed is `design.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub design: DesignParams,
    pub reps: usize,
    pub estimators: Vec<SimEstimator>,
    pub grid: GridSpec,
    pub weight: WeightSpec,
    pub solver: SolverConfig,
    /// Use the design's noise variance instead of estimating it.
    pub known_sigma2: bool,
    /// Store effect vectors and scatter data in each replication.
    pub keep_vectors: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            design: DesignParams::default(),
            reps: 100,
            estimators: SimEstimator::ALL.to_vec(),
            grid: GridSpec::default(),
            weight: WeightSpec::BetaOnly,
            solver: SolverConfig::default(),
            known_sigma2: false,
            keep_vectors: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        self.grid.validate()?;
        self.solver.validate()?;
        if self.reps == 0 {
            return Err(Error::InvalidInput("reps must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidInput("no estimators selected".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOutcome {
    pub estimator: SimEstimator,
    /// `sqrt(compound_loss)` under the experiment's weight.
    pub rmse: f64,
    pub hyperparams: Option<Hyperparams>,
    pub moments: Moments,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scatter: Option<Vec<ScatterPoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReplication {
    pub rep: usize,
    pub seed: u64,
    /// Units kept in the largest connected component.
    pub rows: usize,
    pub cols: usize,
    pub dropped_rows: usize,
    pub dropped_cols: usize,
    pub sigma2: f64,
    pub true_moments: Moments,
    pub outcomes: Vec<EstimatorOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_scatter: Option<Vec<ScatterPoint>>,
}

impl SimReplication {
    pub fn outcome(&self, e: SimEstimator) -> Option<&EstimatorOutcome> {
        self.outcomes.iter().find(|o| o.estimator == e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepFailure {
    pub rep: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: SimEstimator,
    pub reps: usize,
    pub rmse_mean: f64,
    pub rmse_q10: f64,
    pub rmse_q25: f64,
    pub rmse_median: f64,
    pub rmse_q75: f64,
    pub rmse_q90: f64,
    /// Median over replications of this estimator's RMSE over the oracle's.
    pub median_ratio_to_oracle: Option<f64>,
    pub median_lambda_a: Option<f64>,
    pub median_lambda_b: Option<f64>,
    pub median_phi: Option<f64>,
    pub median_mu: Option<f64>,
    pub median_var_alpha: f64,
    pub median_var_beta: f64,
    pub median_cor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub completed: usize,
    pub failures: Vec<RepFailure>,
    pub true_moments: Moments,
    pub summary: Vec<EstimatorSummary>,
    pub replications: Vec<SimReplication>,
    pub elapsed_secs: f64,
}

/// Seed of replication `rep`, derived from the master seed by stream counter.
pub fn rep_seed(master: u64, rep: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(rep as u64);
    rng.next_u64()
}

fn precision_value(p: Precision) -> f64 {
    match p {
        Precision::Zero => 0.0,
        Precision::Finite(v) => v,
        Precision::Infinite => f64::INFINITY,
    }
}

/// Column effects from the one-way model with the moment precision; row effects are
/// the mean residual of each row unit.
/// Runs one replication with the given seed.
pub fn run_replication(config: &ExperimentConfig, rep: usize, seed: u64) -> Result<SimReplication> {
    let sim = generate_design(&config.design, seed)?;
    let (panel, theta) = restrict_to_largest(&sim.panel, &sim.theta)?;
    let graph = build_graph(&panel)?;
    let y = panel.outcomes().to_vec();
    let (rows, cols) = (graph.rows(), graph.cols());
    let known = config.known_sigma2.then_some(config.design.sigma2);
    let solver = SolverConfig { seed: config.solver.seed.wrapping_add(seed), ..config.solver.clone() };
    let opts = ProblemOptions { sigma2: known, weight: config.weight, solver, ..ProblemOptions::default() };
    let problem = ShrinkageProblem::new(graph.clone(), y.clone(), opts)?;

    let criteria: Vec<Criterion> = config.estimators.iter().filter_map(|e| e.criterion()).collect();
    let selected = if criteria.is_empty() {
        Vec::new()
    } else {
        select_many(&problem, &criteria, &config.grid, Some(&theta), config.weight)?
    };

    let mut outcomes = Vec::with_capacity(config.estimators.len());
    for &e in &config.estimators {
        let (est, hp) = match e {
            SimEstimator::Ls => (problem.theta_ls().to_vec(), None),
            SimEstimator::EbOneWay => {
                let (t, hp) = one_way_fit(&graph, &y, known)?;
                (t, Some(hp))
            }
            _ => {
                let c = e.criterion().unwrap();
                let res = selected.iter().find(|s| s.criterion == c).unwrap();
                (res.estimate(&problem)?.theta(), Some(res.hyperparams))
            }
        };
        let rmse = compound_loss(&est, &theta, rows, config.weight)?.sqrt();
        let moments = empirical_moments(&est[..rows], &est[rows..], &graph)?;
        let scatter = if config.keep_vectors { Some(scatter_points(&est, &graph)?) } else { None };
        outcomes.push(EstimatorOutcome {
            estimator: e,
            rmse,
            hyperparams: hp,
            moments,
            estimate: config.keep_vectors.then_some(est),
            scatter,
        });
    }
    Ok(SimReplication {
        rep,
        seed,
        rows,
        cols,
        dropped_rows: config.design.r - rows,
        dropped_cols: config.design.c - cols,
        sigma2: problem.sigma2(),
        true_moments: empirical_moments(&theta[..rows], &theta[rows..], &graph)?,
        outcomes,
        true_scatter: if config.keep_vectors { Some(scatter_points(&theta, &graph)?) } else { None },
        theta: config.keep_vectors.then_some(theta),
    })
}

fn med(values: impl Iterator<Item = f64>) -> Option<f64> {
    median(&values.collect::<Vec<_>>())
}

fn summarize(e: SimEstimator, reps: &[SimReplication]) -> Option<EstimatorSummary> {
    let outs: Vec<&EstimatorOutcome> = reps.iter().filter_map(|r| r.outcome(e)).collect();
    if outs.is_empty() {
        return None;
    }
    let mut rmse: Vec<f64> = outs.iter().map(|o| o.rmse).collect();
    rmse.sort_by(f64::total_cmp);
    let q = |p| quantile(&rmse, p).unwrap();
    let ratios: Vec<f64> = reps
        .iter()
        .filter_map(|r| Some(r.outcome(e)?.rmse / r.outcome(SimEstimator::Oracle)?.rmse))
        .collect();
    let hps: Vec<Hyperparams> = outs.iter().filter_map(|o| o.hyperparams).collect();
    Some(EstimatorSummary {
        estimator: e,
        reps: outs.len(),
        rmse_mean: rmse.iter().sum::<f64>() / rmse.len() as f64,
        rmse_q10: q(0.1),
        rmse_q25: q(0.25),
        rmse_median: q(0.5),
        rmse_q75: q(0.75),
        rmse_q90: q(0.9),
        median_ratio_to_oracle: median(&ratios),
        median_lambda_a: med(hps.iter().map(|h| precision_value(h.lambda_a))),
        median_lambda_b: med(hps.iter().map(|h| precision_value(h.lambda_b))),
        median_phi: med(hps.iter().map(|h| h.phi)),
        median_mu: med(hps.iter().map(|h| h.mu)),
        median_var_alpha: med(outs.iter().map(|o| o.moments.var_alpha)).unwrap(),
        median_var_beta: med(outs.iter().map(|o| o.moments.var_beta)).unwrap(),
        median_cor: med(outs.iter().map(|o| o.moments.cor.unwrap_or(f64::NAN))),
    })
}

fn median_moments(reps: &[SimReplication]) -> Moments {
    Moments {
        var_alpha: med(reps.iter().map(|r| r.true_moments.var_alpha)).unwrap_or(f64::NAN),
        var_beta: med(reps.iter().map(|r| r.true_moments.var_beta)).unwrap_or(f64::NAN),
        cor: med(reps.iter().map(|r| r.true_moments.cor.unwrap_or(f64::NAN))),
    }
}

/// Runs all replications in parallel. Failed replications are recorded, not fatal;
/// the result is identical for any thread count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let master = config.design.seed;
    let results: Vec<(usize, u64, Result<SimReplication>)> = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            let seed = rep_seed(master, rep);
            let res = run_replication(config, rep, seed);
            log::info!("replication {rep} done");
            (rep, seed, res)
        })
        .collect();
    let mut replications = Vec::new();
    let mut failures = Vec::new();
    for (rep, seed, res) in results {
        match res {
            Ok(r) => replications.push(r),
            Err(e) => {
                log::warn!("replication {rep} failed: {e}");
                failures.push(RepFailure { rep, seed, error: e.to_string() });
            }
        }
    }
    let summary = config.estimators.iter().filter_map(|&e| summarize(e, &replications)).collect();
    Ok(ExperimentReport {
        config: config.clone(),
        completed: replications.len(),
        failures,
        true_moments: median_moments(&replications),
        summary,
        replications,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperopt::grid::GridSpec;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            design: DesignParams { r: 200, c: 20, s: 2, pi_mob: 0.1, seed: 11, ..DesignParams::design(1).unwrap() },
            reps: 4,
            grid: GridSpec { refinement_rounds: 0, ..GridSpec::regular((1e-2, 1e2, 5), (-0.5, 0.5, 3)) },
            keep_vectors: true,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn report_is_deterministic_and_rmse_recomputes_exactly() {
        let cfg = tiny();
        let mut a = run_experiment(&cfg).unwrap();
        let mut b = run_experiment(&cfg).unwrap();
        a.elapsed_secs = 0.0;
        b.elapsed_secs = 0.0;
        assert_eq!(a, b);
        assert_eq!(a.completed, 4);
        for r in &a.replications {
            let theta = r.theta.as_ref().unwrap();
            for o in &r.outcomes {
                let loss = compound_loss(o.estimate.as_ref().unwrap(), theta, r.rows, cfg.weight).unwrap();
                assert_eq!(o.rmse, loss.sqrt());
            }
            let ol = r.outcome(SimEstimator::Oracle).unwrap().rmse;
            assert!(ol <= r.outcome(SimEstimator::EbUre).unwrap().rmse);
            assert!(ol <= r.outcome(SimEstimator::EbMle).unwrap().rmse);
        }
        let s = a.summary.iter().find(|s| s.estimator == SimEstimator::Oracle).unwrap();
        assert_eq!(s.median_ratio_to_oracle, Some(1.0));
    }

    #[test]
    fn summary_ignores_replication_order() {
        let cfg = tiny();
        let rep = run_experiment(&cfg).unwrap();
        let mut rev = rep.replications.clone();
        rev.reverse();
        for e in SimEstimator::ALL {
            assert_eq!(summarize(e, &rep.replications), summarize(e, &rev));
        }
    }

    #[test]
    fn zero_noise_recovers_truth() {
        let cfg = ExperimentConfig {
            design: DesignParams { sigma2: 1e-12, ..tiny().design },
            reps: 1,
            estimators: vec![SimEstimator::Ls, SimEstimator::EbUre, SimEstimator::Oracle],
            grid: GridSpec { refinement_rounds: 0, ..GridSpec::regular((1e-8, 1.0, 5), (0.0, 0.0, 1)) },
            known_sigma2: true,
            ..tiny()
        };
        let rep = run_experiment(&cfg).unwrap();
        for o in &rep.replications[0].outcomes {
            assert!(o.rmse < 1e-4, "{:?} {}", o.estimator, o.rmse);
        }
    }

    #[test]
    fn failures_are_recorded() {
        let cfg = ExperimentConfig { estimators: vec![SimEstimator::Oracle, SimEstimator::Ls], ..tiny() };
        let rep = run_experiment(&cfg).unwrap();
        assert!(rep.failures.is_empty());
        assert!(run_experiment(&ExperimentConfig { reps: 0, ..tiny() }).is_err());
        assert_eq!(rep_seed(1, 0), rep_seed(1, 0));
        assert_ne!(rep_seed(1, 0), rep_seed(1, 1));
    }

    #[test]
    fn estimator_names_round_trip() {
        for e in SimEstimator::ALL {
            assert_eq!(e.name().parse::<SimEstimator>().unwrap(), e);
        }
    }
}
