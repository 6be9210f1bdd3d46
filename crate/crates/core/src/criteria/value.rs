use serde::{Deserialize, Serialize};

use crate::estimators::problem::{ShrinkageProblem, TraceBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Ure,
    Mle,
    /// Compound loss against known effects (simulation only).
    Oracle,
}

impl Criterion {
    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Ure => "ure",
            Criterion::Mle => "mle",
            Criterion::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "ure" => Ok(Criterion::Ure),
            "mle" => Ok(Criterion::Mle),
            "oracle" => Ok(Criterion::Oracle),
            _ => Err(crate::error::Error::InvalidInput(format!("unknown criterion '{s}' (ure, mle)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceInfo {
    pub mode: TraceBackend,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl TraceInfo {
    pub fn of(problem: &ShrinkageProblem) -> Self {
        match problem.backend() {
            TraceBackend::Exact => TraceInfo { mode: TraceBackend::Exact, probes: None, seed: None },
            TraceBackend::Hutchinson => TraceInfo {
                mode: TraceBackend::Hutchinson,
                probes: problem.probes().map(|p| p.len()),
                seed: problem.probes().map(|p| p.seed()),
            },
        }
    }
}

/// Parts of a criterion value. Unused parts are `None`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Components {
    /// `2 σ² tr[W R G^{-1} R']` (risk estimate).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_term: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_std_err: Option<f64>,
    /// Weighted squared shrinkage of the LS estimate toward the location (risk
    /// estimate), or the data quadratic form (likelihood), or the loss itself.
    pub quadratic: f64,
    /// `σ² [log det G - log det Λ*]` (likelihood).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logdet_term: Option<f64>,
    /// Hyperparameter-free constant that turns the optimized risk estimate into an
    /// unbiased estimate of the risk: `-σ² tr[W R L^+ R']`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionValue {
    pub criterion: Criterion,
    /// Value that is optimized.
    pub value: f64,
    pub components: Components,
    /// Location coefficients the value was computed at.
    pub location: Vec<f64>,
    pub trace: TraceInfo,
}

impl CriterionValue {
    /// Risk estimate including the constant; `None` when it is unavailable.
    pub fn unbiased_risk(&self) -> Option<f64> {
        self.components.constant.map(|c| self.value + c)
    }
}
