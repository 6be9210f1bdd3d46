use nalgebra::{DMatrix, DVector};

use crate::criteria::quadratic::LocationQuadratic;
use crate::criteria::ure::{resolve_delta, scale_of};
use crate::criteria::value::{Components, Criterion, CriterionValue, TraceInfo};
use crate::error::{Error, Result};
use crate::estimators::hyperparams::Hyperparams;
use crate::estimators::problem::{dot, Needs, PointSolve, ShrinkageProblem};

/// `x' (L - L G^{-1} L) x` with `x = theta_ls - Z delta`, as a quadratic in `delta`.
pub fn mle_quadratic(problem: &ShrinkageProblem, ps: &PointSolve) -> LocationQuadratic {
    let bty = problem.bty();
    let (z, lz) = (problem.z(), problem.lz());
    let k = z.len();
    LocationQuadratic {
        q0: dot(problem.theta_ls(), bty) - dot(bty, &ps.a),
        b: DVector::from_fn(k, |i, _| dot(&z[i], bty) - dot(&lz[i], &ps.a)),
        a: DMatrix::from_fn(k, k, |i, j| dot(&z[i], &lz[j]) - dot(&lz[i], &ps.g_z[j])),
        reference: (0..k).map(|i| dot(&z[i], &lz[i])).collect(),
    }
}

pub fn mle_from_solve(problem: &ShrinkageProblem, ps: &PointSolve, delta: &[f64]) -> Result<CriterionValue> {
    let (lg, lp) = match (ps.logdet_g, ps.logdet_prior) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::InvalidInput("point solve lacks log-determinants".into())),
    };
    let quadratic = mle_quadratic(problem, ps).eval(delta);
    let logdet_term = problem.sigma2() * (lg - lp);
    Ok(CriterionValue {
        criterion: Criterion::Mle,
        value: logdet_term + quadratic,
        components: Components {
            trace_term: None,
            trace_std_err: None,
            quadratic,
            logdet_term: Some(logdet_term),
            constant: None,
        },
        location: delta.to_vec(),
        trace: TraceInfo::of(problem),
    })
}

/// `-2 σ²` times the log marginal likelihood, up to hyperparameter-free constants.
pub fn marginal_neg_loglik(problem: &ShrinkageProblem, hp: &Hyperparams, delta: Option<&[f64]>) -> Result<CriterionValue> {
    let delta = resolve_delta(problem, hp, delta)?;
    let ps = problem.solve_point(scale_of(hp)?, Needs { trace: false, logdet: true })?;
    mle_from_solve(problem, &ps, &delta)
}
