//! Solvers behind every estimator: conjugate gradients, stochastic traces, sparse
//! LDLᵀ with selected inversion, and Lanczos eigenvalues.

pub mod cg;
pub mod config;
pub mod eigen;
pub mod hutchinson;
pub mod ldl;
pub mod shifted;
pub mod sparse;

pub use cg::{cg_solve, CgOutcome, CgParams};
pub use config::{ProbeDistribution, SolverConfig, TraceMode};
pub use eigen::{smallest_nonzero_eigs, smallest_nonzero_eigs_sparse, EigenOptions, EigenResult};
pub use hutchinson::{hutchinson_trace, ProbeSet, TraceEstimate};
pub use ldl::{SparseLdl, SymbolicLdl};
pub use shifted::{BlockTraces, PriorScale, ReducedFactor, ReducedSystem, ShiftedPrecisionOperator};
pub use sparse::SymSparse;
