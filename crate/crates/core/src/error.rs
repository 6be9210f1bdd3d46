use thiserror::Error;

/// Which side of the bipartite graph a unit belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Side {
    /// Row units (students, workers): the α block.
    Row,
    /// Column units (teachers, firms): the β block.
    Col,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Row => write!(f, "row"),
            Side::Col => write!(f, "column"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate observation for row unit {row} in period {period}")]
    DuplicateObservation { row: usize, period: usize },

    #[error("{what} id {id} out of range 1..={max}")]
    IdOutOfRange { what: &'static str, id: usize, max: usize },

    #[error("non-finite outcome at observation {index}")]
    NonFiniteOutcome { index: usize },

    #[error("{side} unit {id} has zero degree; drop isolated units before building the graph")]
    ZeroDegree { side: Side, id: usize },

    #[error("graph has {components} connected components; extract the largest component first")]
    Disconnected { components: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("iterative solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not positive definite (pivot {pivot} = {value:.3e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("covariates are rank deficient after partialling out fixed effects: columns {columns:?}")]
    RankDeficient { columns: Vec<String> },

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    #[error("residual degrees of freedom must be positive (n = {n}, parameters = {params})")]
    DegreesOfFreedom { n: usize, params: usize },

    #[error("implied signal variance {0:.3e} is not positive; use full shrinkage (lambda_b = infinity)")]
    NonPositiveSignalVariance(f64),

    #[error("exact trace refused: {0}")]
    ExactTraceUnavailable(String),

    #[error("all {0} grid points failed")]
    AllGridPointsFailed(usize),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// True for errors caused by numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. }
                | Error::NonFinite(_)
                | Error::NotPositiveDefinite { .. }
                | Error::NonPositiveSignalVariance(_)
                | Error::AllGridPointsFailed(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
