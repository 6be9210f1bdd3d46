use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diagonal weight matrix of the compound loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightSpec {
    /// `I_{r+c} / (r + c)`.
    #[default]
    AllEffects,
    /// `diag(0_r, I_c) / c`.
    BetaOnly,
    /// `diag(I_r, 0_c) / r`.
    AlphaOnly,
}

impl WeightSpec {
    /// Per-coordinate weights `(row block, column block)`.
    pub fn block_weights(&self, rows: usize, cols: usize) -> (f64, f64) {
        match self {
            WeightSpec::AllEffects => {
                let w = 1.0 / (rows + cols) as f64;
                (w, w)
            }
            WeightSpec::BetaOnly => (0.0, 1.0 / cols as f64),
            WeightSpec::AlphaOnly => (1.0 / rows as f64, 0.0),
        }
    }

    /// Full diagonal of W.
    pub fn diagonal(&self, rows: usize, cols: usize) -> Vec<f64> {
        let (wa, wb) = self.block_weights(rows, cols);
        let mut d = vec![wa; rows];
        d.extend(std::iter::repeat_n(wb, cols));
        d
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightSpec::AllEffects => "all_effects",
            WeightSpec::BetaOnly => "beta_only",
            WeightSpec::AlphaOnly => "alpha_only",
        }
    }
}

impl std::str::FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" | "all_effects" | "a+b" | "ab" => Ok(WeightSpec::AllEffects),
            "beta" | "beta_only" | "b" => Ok(WeightSpec::BetaOnly),
            "alpha" | "alpha_only" | "a" => Ok(WeightSpec::AlphaOnly),
            _ => Err(Error::InvalidInput(format!("unknown weight '{s}' (all_effects, beta_only, alpha_only)"))),
        }
    }
}

/// `x' W y` for the block-diagonal weights `(wa, wb)`.
pub(crate) fn weighted_dot(x: &[f64], y: &[f64], rows: usize, w: (f64, f64)) -> f64 {
    let a: f64 = x[..rows].iter().zip(&y[..rows]).map(|(p, q)| p * q).sum();
    let b: f64 = x[rows..].iter().zip(&y[rows..]).map(|(p, q)| p * q).sum();
    w.0 * a + w.1 * b
}

/// `(θ̂ - θ)' W (θ̂ - θ)`.
pub fn compound_loss(estimate: &[f64], truth: &[f64], rows: usize, weight: WeightSpec) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: estimate.len() });
    }
    if rows > truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: rows });
    }
    let cols = truth.len() - rows;
    let d: Vec<f64> = estimate.iter().zip(truth).map(|(a, b)| a - b).collect();
    Ok(weighted_dot(&d, &d, rows, weight.block_weights(rows, cols)))
}
