use nalgebra::{DMatrix, DVector};

use crate::criteria::quadratic::LocationQuadratic;
use crate::criteria::weights::{weighted_dot, WeightSpec};
use crate::error::{Error, Result};
use crate::estimators::problem::{PointSolve, ShrinkageProblem};

/// Compound loss of the posterior mean against `truth`, as a quadratic in `delta`.
pub fn oracle_quadratic(
    problem: &ShrinkageProblem,
    ps: &PointSolve,
    truth: &[f64],
    weight: WeightSpec,
) -> Result<LocationQuadratic> {
    if truth.len() != ps.ra.len() {
        return Err(Error::DimensionMismatch { expected: ps.ra.len(), got: truth.len() });
    }
    let r = problem.rows();
    let w = weight.block_weights(r, problem.cols());
    let wd = |x: &[f64], y: &[f64]| weighted_dot(x, y, r, w);
    let e0: Vec<f64> = ps.ra.iter().zip(truth).map(|(a, t)| a - t).collect();
    let k = ps.s_z.len();
    Ok(LocationQuadratic {
        q0: wd(&e0, &e0),
        b: DVector::from_fn(k, |i, _| -wd(&ps.s_z[i], &e0)),
        a: DMatrix::from_fn(k, k, |i, j| wd(&ps.s_z[i], &ps.s_z[j])),
        reference: problem.z().iter().map(|z| wd(z, z)).collect(),
    })
}
