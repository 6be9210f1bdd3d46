use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the prior location enters the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MuHandling {
    /// Minimize the criterion over the location at every grid point.
    #[default]
    Concentrated,
    /// Constant location held at the given value.
    Fixed(f64),
}

/// Search grid over `(lambda_a, lambda_b, phi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub lambda_a: Vec<f64>,
    pub lambda_b: Vec<f64>,
    pub phi: Vec<f64>,
    pub mu: MuHandling,
    /// Local refinement rounds around the current argmin.
    pub refinement_rounds: usize,
    /// Refined step is the coarse step divided by this.
    pub refinement_density: usize,
    /// Keep every evaluated point in the result.
    pub keep_surface: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lambda_a: log_space(1e-3, 1e3, 25),
            lambda_b: log_space(1e-3, 1e3, 25),
            phi: lin_space(-0.9, 0.9, 15),
            mu: MuHandling::Concentrated,
            refinement_rounds: 1,
            refinement_density: 3,
            keep_surface: false,
        }
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| {
            if k == 0 {
                lo
            } else if k == n - 1 {
                hi
            } else {
                (a + (b - a) * k as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn lin_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| if k == n - 1 { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 })
        .collect()
}

impl GridSpec {
    /// Log-spaced precisions and evenly spaced `phi`.
    pub fn regular(lambda: (f64, f64, usize), phi: (f64, f64, usize)) -> Self {
        GridSpec {
            lambda_a: log_space(lambda.0, lambda.1, lambda.2),
            lambda_b: log_space(lambda.0, lambda.1, lambda.2),
            phi: lin_space(phi.0, phi.1, phi.2),
            ..GridSpec::default()
        }
    }

    /// A single point.
    pub fn single(lambda_a: f64, lambda_b: f64, phi: f64) -> Self {
        GridSpec {
            lambda_a: vec![lambda_a],
            lambda_b: vec![lambda_b],
            phi: vec![phi],
            refinement_rounds: 0,
            ..GridSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, axis) in [("lambda_a", &self.lambda_a), ("lambda_b", &self.lambda_b), ("phi", &self.phi)] {
            if axis.is_empty() {
                return Err(Error::InvalidInput(format!("grid axis {name} is empty")));
            }
            if axis.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidInput(format!("grid axis {name} must be strictly increasing")));
            }
        }
        if self.lambda_a.iter().chain(&self.lambda_b).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput("grid precisions must lie in (0, inf)".into()));
        }
        if self.phi.iter().any(|p| !(p.abs() < 1.0)) {
            return Err(Error::InvalidInput("grid phi values must satisfy |phi| < 1".into()));
        }
        if self.refinement_rounds > 0 && self.refinement_density == 0 {
            return Err(Error::InvalidInput("refinement_density must be at least 1".into()));
        }
        if let MuHandling::Fixed(m) = self.mu {
            if !m.is_finite() {
                return Err(Error::InvalidInput("fixed mu must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lambda_a.len() * self.lambda_b.len() * self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All points in lexicographic order.
    pub fn points(&self) -> Vec<[f64; 3]> {
        cartesian(&self.lambda_a, &self.lambda_b, &self.phi)
    }
}

pub(crate) fn cartesian(a: &[f64], b: &[f64], p: &[f64]) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(a.len() * b.len() * p.len());
    for &x in a {
        for &y in b {
            for &z in p {
                out.push([x, y, z]);
            }
        }
    }
    out
}

/// Finer axis spanning the neighbours of the point nearest `best`.
pub(crate) fn refine_axis(axis: &[f64], best: f64, density: usize, log: bool) -> Vec<f64> {
    if axis.len() < 2 {
        return axis.to_vec();
    }
    let f = |v: f64| if log { v.ln() } else { v };
    let idx = axis
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| (f(**a) - f(best)).abs().total_cmp(&(f(**b) - f(best)).abs()))
        .map(|(i, _)| i)
        .unwrap();
    let lo = axis[idx.saturating_sub(1)];
    let hi = axis[(idx + 1).min(axis.len() - 1)];
    let steps = if idx == 0 || idx == axis.len() - 1 { density } else { 2 * density };
    let mut out = if log { log_space(lo, hi, steps + 1) } else { lin_space(lo, hi, steps + 1) };
    // keep the centre exactly so the current argmin stays on the refined axis
    let centre = if idx == 0 { 0 } else { density };
    out[centre] = axis[idx];
    out
}
