use serde::Serialize;

use crate::estimators::hyperparams::Hyperparams;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    /// `direct`, `cg`, `closed_form`.
    pub method: String,
    pub iterations: usize,
    /// Largest solver residual norm over all solves.
    pub residual: f64,
}

impl SolverDiagnostics {
    pub fn new(method: &str, iterations: usize, residual: f64) -> Self {
        SolverDiagnostics { method: method.to_string(), iterations, residual }
    }
}

/// A normalized estimate `(alpha, beta)` with the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub hyperparams: Option<Hyperparams>,
    /// Prior location coefficients (`[mu]` for a constant location).
    pub location: Vec<f64>,
    pub sigma2: Option<f64>,
    pub criterion: Option<f64>,
    pub diagnostics: SolverDiagnostics,
    /// `sum(beta)`.
    pub normalization: f64,
}

impl EstimateResult {
    pub fn from_theta(theta: &[f64], rows: usize, diagnostics: SolverDiagnostics) -> Self {
        let alpha = theta[..rows].to_vec();
        let beta = theta[rows..].to_vec();
        let normalization = beta.iter().sum();
        EstimateResult {
            alpha,
            beta,
            hyperparams: None,
            location: Vec::new(),
            sigma2: None,
            criterion: None,
            diagnostics,
            normalization,
        }
    }

    pub fn theta(&self) -> Vec<f64> {
        let mut t = self.alpha.clone();
        t.extend_from_slice(&self.beta);
        t
    }

    /// `|sum(beta)| <= 1e-8 c max(1, max|beta|)`.
    pub fn is_normalized(&self) -> bool {
        let m = self.beta.iter().fold(1.0f64, |m, b| m.max(b.abs()));
        self.normalization.abs() <= 1e-8 * self.beta.len() as f64 * m
    }
}
