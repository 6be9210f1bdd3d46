use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution of Hutchinson probe vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProbeDistribution {
    #[default]
    Gaussian,
    Rademacher,
}

/// How trace terms of the risk estimate are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TraceMode {
    /// Exact when the sparse factor fits the fill budget, stochastic otherwise.
    #[default]
    Auto,
    Exact,
    Hutchinson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Iteration cap for conjugate gradients; `None` means `10 (r + c)`.
    pub max_iter: Option<usize>,
    pub probes: usize,
    pub probe_distribution: ProbeDistribution,
    pub seed: u64,
    pub trace_mode: TraceMode,
    /// Largest number of off-diagonal factor entries accepted for exact traces.
    pub max_fill: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_iter: None,
            probes: 64,
            probe_distribution: ProbeDistribution::Gaussian,
            seed: 0,
            trace_mode: TraceMode::Auto,
            max_fill: 20_000_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::InvalidInput("solver tolerances must be positive".into()));
        }
        if self.probes == 0 {
            return Err(Error::InvalidInput("probe count must be at least 1".into()));
        }
        Ok(())
    }

    pub fn max_iter_for(&self, dim: usize) -> usize {
        self.max_iter.unwrap_or(10 * dim).max(1)
    }
}
