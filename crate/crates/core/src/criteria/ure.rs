use nalgebra::{DMatrix, DVector};

use crate::criteria::quadratic::LocationQuadratic;
use crate::criteria::value::{Components, Criterion, CriterionValue, TraceInfo};
use crate::error::{Error, Result};
use crate::estimators::hyperparams::Hyperparams;
use crate::estimators::problem::{Needs, PointSolve, ShrinkageProblem};
use crate::sparse_linalg::shifted::PriorScale;

pub(crate) fn scale_of(hp: &Hyperparams) -> Result<PriorScale> {
    match (hp.lambda_a.as_finite(), hp.lambda_b.as_finite()) {
        (Some(a), Some(b)) => {
            let s = PriorScale::new(a, b, hp.phi);
            s.validate()?;
            Ok(s)
        }
        _ => Err(Error::InvalidHyperparams("criteria need finite precisions".into())),
    }
}

pub(crate) fn resolve_delta(problem: &ShrinkageProblem, hp: &Hyperparams, delta: Option<&[f64]>) -> Result<Vec<f64>> {
    let d = delta.map(|d| d.to_vec()).unwrap_or_else(|| vec![hp.mu]);
    if d.len() != problem.z().len() {
        return Err(Error::DimensionMismatch { expected: problem.z().len(), got: d.len() });
    }
    Ok(d)
}

/// Squared weighted norm of `S(theta_ls - Z delta)` as a quadratic in `delta`.
pub fn ure_quadratic(problem: &ShrinkageProblem, ps: &PointSolve) -> LocationQuadratic {
    let k = ps.s_z.len();
    let wd = |x: &[f64], y: &[f64]| problem.weighted_dot(x, y);
    LocationQuadratic {
        q0: wd(&ps.s_ls, &ps.s_ls),
        b: DVector::from_fn(k, |i, _| wd(&ps.s_z[i], &ps.s_ls)),
        a: DMatrix::from_fn(k, k, |i, j| wd(&ps.s_z[i], &ps.s_z[j])),
        reference: problem.z().iter().map(|z| wd(z, z)).collect(),
    }
}

/// Risk estimate from a point solve that carries the trace term.
pub fn ure_from_solve(problem: &ShrinkageProblem, ps: &PointSolve, delta: &[f64]) -> Result<CriterionValue> {
    let t = ps.trace.ok_or_else(|| Error::InvalidInput("point solve lacks the trace term".into()))?;
    let quadratic = ure_quadratic(problem, ps).eval(delta);
    let trace_term = 2.0 * problem.sigma2() * t;
    Ok(CriterionValue {
        criterion: Criterion::Ure,
        value: trace_term + quadratic,
        components: Components {
            trace_term: Some(trace_term),
            trace_std_err: ps.trace_std_err.map(|s| 2.0 * problem.sigma2() * s),
            quadratic,
            logdet_term: None,
            constant: problem.ls_risk().map(|v| -v),
        },
        location: delta.to_vec(),
        trace: TraceInfo::of(problem),
    })
}

/// Unbiased risk estimate at `hp`, up to the reported constant.
///
/// `delta` gives the location coefficients; `None` uses `[hp.mu]`.
pub fn ure(problem: &ShrinkageProblem, hp: &Hyperparams, delta: Option<&[f64]>) -> Result<CriterionValue> {
    let delta = resolve_delta(problem, hp, delta)?;
    let ps = problem.solve_point(scale_of(hp)?, Needs { trace: true, logdet: false })?;
    ure_from_solve(problem, &ps, &delta)
}
