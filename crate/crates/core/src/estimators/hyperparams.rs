use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse_linalg::shifted::PriorScale;

/// A prior precision, with explicit states for the two limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    /// No shrinkage on this side.
    Zero,
    Finite(f64),
    /// Full shrinkage to the prior location.
    Infinite,
}

impl Precision {
    /// Finite value, mapping `Zero` to 0.0; `None` for `Infinite`.
    pub fn as_finite(&self) -> Option<f64> {
        match *self {
            Precision::Zero => Some(0.0),
            Precision::Finite(v) => Some(v),
            Precision::Infinite => None,
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if let Precision::Finite(v) = *self {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidHyperparams(format!("{name} must be in (0, inf), got {v}")));
            }
        }
        Ok(())
    }
}

/// `(mu, lambda_a, lambda_b, phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub mu: f64,
    pub lambda_a: Precision,
    pub lambda_b: Precision,
    pub phi: f64,
}

impl Hyperparams {
    /// Interior point: both precisions finite and positive, `|phi| < 1`.
    pub fn new(mu: f64, lambda_a: f64, lambda_b: f64, phi: f64) -> Result<Self> {
        let hp = Hyperparams {
            mu,
            lambda_a: Precision::Finite(lambda_a),
            lambda_b: Precision::Finite(lambda_b),
            phi,
        };
        hp.validate()?;
        Ok(hp)
    }

    /// Allows the `Zero` / `Infinite` limit states.
    pub fn with_limits(mu: f64, lambda_a: Precision, lambda_b: Precision, phi: f64) -> Result<Self> {
        let hp = Hyperparams { mu, lambda_a, lambda_b, phi };
        hp.validate()?;
        Ok(hp)
    }

    pub fn from_scale(mu: f64, scale: PriorScale) -> Result<Self> {
        Self::new(mu, scale.lambda_a, scale.lambda_b, scale.phi)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::InvalidHyperparams(format!("mu must be finite, got {}", self.mu)));
        }
        self.lambda_a.validate("lambda_a")?;
        self.lambda_b.validate("lambda_b")?;
        if !(self.phi.abs() < 1.0) {
            return Err(Error::InvalidHyperparams(format!("|phi| must be below 1, got {}", self.phi)));
        }
        Ok(())
    }

    /// True when both precisions are finite and positive.
    pub fn is_interior(&self) -> bool {
        matches!((self.lambda_a, self.lambda_b), (Precision::Finite(_), Precision::Finite(_)))
    }

    /// The scale for interior points.
    pub fn scale(&self) -> Option<PriorScale> {
        match (self.lambda_a, self.lambda_b) {
            (Precision::Finite(a), Precision::Finite(b)) => Some(PriorScale::new(a, b, self.phi)),
            _ => None,
        }
    }
}

/// Design of the prior location `v = Z delta`.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorLocation {
    /// `v = (mu 1_r, 0_c)`.
    ConstantMu,
    /// `v = (Z_a delta_a, Z_b delta_b)`. Columns of `Z_b` are centred so that the
    /// column-side location respects `sum(beta) = 0`.
    CovariateIndex {
        za: DMatrix<f64>,
        zb: DMatrix<f64>,
        names: Vec<String>,
    },
}

impl PriorLocation {
    /// Row-side index on the given columns plus an intercept; column side fixed at 0.
    pub fn row_index_with_intercept(za: &DMatrix<f64>, names: &[String]) -> Self {
        let r = za.nrows();
        let mut full = DMatrix::from_element(r, za.ncols() + 1, 1.0);
        full.columns_mut(1, za.ncols()).copy_from(za);
        let mut all = vec!["intercept".to_string()];
        all.extend_from_slice(names);
        PriorLocation::CovariateIndex { za: full, zb: DMatrix::zeros(0, 0), names: all }
    }

    /// Number of location coefficients.
    pub fn dim(&self) -> usize {
        match self {
            PriorLocation::ConstantMu => 1,
            PriorLocation::CovariateIndex { za, zb, .. } => za.ncols() + zb.ncols(),
        }
    }

    /// Columns of Z as full-length vectors over `(alpha, beta)`.
    pub fn columns(&self, rows: usize, cols: usize) -> Result<Vec<Vec<f64>>> {
        match self {
            PriorLocation::ConstantMu => {
                let mut v = vec![1.0; rows];
                v.extend(std::iter::repeat_n(0.0, cols));
                Ok(vec![v])
            }
            PriorLocation::CovariateIndex { za, zb, .. } => {
                if za.ncols() > 0 && za.nrows() != rows {
                    return Err(Error::DimensionMismatch { expected: rows, got: za.nrows() });
                }
                if zb.ncols() > 0 && zb.nrows() != cols {
                    return Err(Error::DimensionMismatch { expected: cols, got: zb.nrows() });
                }
                let mut out = Vec::new();
                for k in 0..za.ncols() {
                    let mut v: Vec<f64> = za.column(k).iter().copied().collect();
                    v.extend(std::iter::repeat_n(0.0, cols));
                    out.push(v);
                }
                for k in 0..zb.ncols() {
                    let col = zb.column(k);
                    let mean = col.mean();
                    let mut v = vec![0.0; rows];
                    v.extend(col.iter().map(|x| x - mean));
                    out.push(v);
                }
                Ok(out)
            }
        }
    }

    pub fn names(&self) -> Vec<String> {
        match self {
            PriorLocation::ConstantMu => vec!["mu".into()],
            PriorLocation::CovariateIndex { names, za, zb } => {
                if names.len() == za.ncols() + zb.ncols() {
                    names.clone()
                } else {
                    (0..za.ncols() + zb.ncols()).map(|k| format!("z{}", k + 1)).collect()
                }
            }
        }
    }
}
