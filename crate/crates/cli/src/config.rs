use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use twoway::criteria::{Criterion, WeightSpec};
use twoway::hyperopt::GridSpec;
use twoway::simulate::{DesignParams, SimEstimator};
use twoway::sparse_linalg::{EigenOptions, SolverConfig};

use crate::error::input_error;

/// Estimator run by `estimate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    /// Empirical Bayes with hyperparameters chosen by `criterion`.
    #[default]
    Eb,
    /// Least squares, no shrinkage.
    Ls,
    /// Column effects shrunk ignoring row effects.
    Oneway,
    /// Least-squares column effects shrunk without a row prior.
    Projoneway,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    /// Covariate columns averaged per row unit to form the row-side prior location.
    pub covariates: Vec<String>,
    /// Covariate columns partialled out of the outcome before estimation.
    pub regressors: Vec<String>,
    /// Slopes on `regressors` estimated elsewhere. Required for lagged outcomes,
    /// which are not strictly exogenous.
    pub gamma: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseConfig {
    /// Smallest non-zero eigenvalues reported per Laplacian.
    pub eigenvalues: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub dense_threshold: usize,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        let e = EigenOptions::default();
        DiagnoseConfig { eigenvalues: 5, tol: e.tol, max_iter: e.max_iter, dense_threshold: e.dense_threshold }
    }
}

impl DiagnoseConfig {
    pub fn eigen_options(&self, seed: u64) -> EigenOptions {
        EigenOptions { tol: self.tol, max_iter: self.max_iter, dense_threshold: self.dense_threshold, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// Named design; the `[design]` table overrides it when both are given.
    pub preset: Option<String>,
    /// Divides `r`, `c` and `s` of the design.
    pub scale_down: usize,
    pub reps: usize,
    pub estimators: Vec<SimEstimator>,
    /// Give the estimators the true noise variance instead of estimating it.
    pub known_sigma2: bool,
    /// Write per-unit scatter data for the first replication.
    pub scatter: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            preset: None,
            scale_down: 1,
            reps: 100,
            estimators: SimEstimator::ALL.to_vec(),
            known_sigma2: false,
            scatter: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Needed whenever a result depends on random numbers.
    pub seed: Option<u64>,
    /// Worker threads; all logical cores when unset.
    pub threads: Option<usize>,
    pub estimator: EstimatorKind,
    pub criterion: Criterion,
    /// Loss weights; all effects for `estimate`, column effects for `simulate`.
    pub weight: Option<WeightSpec>,
    /// Known noise variance; estimated from the data when unset.
    pub sigma2: Option<f64>,
    pub drop_isolated: bool,
    pub largest_component: bool,
    /// Write every evaluated grid point to `surface.csv`.
    pub write_surface: bool,
    pub solver: SolverConfig,
    pub grid: GridSpec,
    pub prior: PriorConfig,
    pub diagnose: DiagnoseConfig,
    pub simulate: SimulateConfig,
    pub design: Option<DesignParams>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            out_dir: PathBuf::from("out"),
            seed: None,
            threads: None,
            estimator: EstimatorKind::Eb,
            criterion: Criterion::Ure,
            weight: None,
            sigma2: None,
            drop_isolated: false,
            largest_component: false,
            write_surface: false,
            solver: SolverConfig::default(),
            grid: GridSpec::default(),
            prior: PriorConfig::default(),
            diagnose: DiagnoseConfig::default(),
            simulate: SimulateConfig::default(),
            design: None,
        }
    }
}

impl RunConfig {
    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(input_error)?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(anyhow::Error::from)
        } else {
            toml::from_str(&text).map_err(anyhow::Error::from)
        };
        parsed.with_context(|| format!("parsing config {}", path.display())).map_err(input_error)
    }

    pub fn defaults_toml() -> anyhow::Result<String> {
        Ok(toml::to_string(&RunConfig::default())?)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let check = || -> anyhow::Result<()> {
            if self.criterion == Criterion::Oracle {
                bail!("criterion must be ure or mle");
            }
            if let Some(s) = self.sigma2 {
                if !(s.is_finite() && s >= 0.0) {
                    bail!("sigma2 must be finite and non-negative, got {s}");
                }
            }
            if self.threads == Some(0) {
                bail!("threads must be at least 1");
            }
            if self.prior.gamma.as_ref().is_some_and(|g| g.len() != self.prior.regressors.len()) {
                bail!("prior.gamma needs one slope per entry of prior.regressors");
            }
            if self.diagnose.eigenvalues == 0 {
                bail!("diagnose.eigenvalues must be at least 1");
            }
            self.solver.validate()?;
            self.grid.validate()?;
            Ok(())
        };
        check().context("invalid configuration").map_err(input_error)
    }

    /// SHA-256 of the canonical JSON form, ignoring settings that cannot change results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        c.threads = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

pub fn file_sha256(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display())).map_err(input_error)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
