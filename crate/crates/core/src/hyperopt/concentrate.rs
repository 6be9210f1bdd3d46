use crate::criteria::mle::mle_quadratic;
use crate::criteria::oracle::oracle_quadratic;
use crate::criteria::quadratic::{LocationQuadratic, Minimizer};
use crate::criteria::ure::ure_quadratic;
use crate::criteria::weights::WeightSpec;
use crate::error::{Error, Result};
use crate::estimators::hyperparams::PriorLocation;
use crate::estimators::problem::{Needs, PointSolve, ShrinkageProblem};
use crate::sparse_linalg::shifted::PriorScale;

/// Minimizes over the location, clamping a constant mean to the problem's range.
pub(crate) fn locate(problem: &ShrinkageProblem, q: &LocationQuadratic) -> Minimizer {
    let mut m = q.minimize();
    if matches!(problem.location(), PriorLocation::ConstantMu) {
        let (lo, hi) = problem.mu_range();
        let mu = m.delta[0];
        if mu < lo || mu > hi {
            m.delta[0] = mu.clamp(lo, hi);
        }
    }
    m
}

fn constant_only(problem: &ShrinkageProblem) -> Result<()> {
    match problem.location() {
        PriorLocation::ConstantMu => Ok(()),
        _ => Err(Error::InvalidInput("a scalar mean needs a constant prior location".into())),
    }
}

fn warn_degenerate(m: &Minimizer, what: &str) {
    if m.degenerate {
        log::warn!("{what}: location system is singular; using the fallback solution");
    }
}

/// Location coefficients minimizing the risk estimate at `scale`.
pub fn concentrate_delta_ure(problem: &ShrinkageProblem, scale: PriorScale) -> Result<Vec<f64>> {
    let ps = problem.solve_point(scale, Needs::default())?;
    let m = locate(problem, &ure_quadratic(problem, &ps));
    warn_degenerate(&m, "risk estimate");
    Ok(m.delta)
}

/// Constant prior mean minimizing the risk estimate at `scale`.
pub fn concentrate_mu_ure(problem: &ShrinkageProblem, scale: PriorScale) -> Result<f64> {
    constant_only(problem)?;
    Ok(concentrate_delta_ure(problem, scale)?[0])
}

/// Location coefficients minimizing the likelihood criterion at `scale`.
pub fn concentrate_delta_mle(problem: &ShrinkageProblem, scale: PriorScale) -> Result<Vec<f64>> {
    let ps = problem.solve_point(scale, Needs::default())?;
    let m = locate(problem, &mle_quadratic(problem, &ps));
    warn_degenerate(&m, "likelihood");
    Ok(m.delta)
}

/// Constant prior mean minimizing the likelihood criterion at `scale`.
pub fn concentrate_mu_mle(problem: &ShrinkageProblem, scale: PriorScale) -> Result<f64> {
    constant_only(problem)?;
    Ok(concentrate_delta_mle(problem, scale)?[0])
}

/// Location coefficients minimizing the compound loss against `truth`.
pub fn concentrate_oracle(
    problem: &ShrinkageProblem,
    ps: &PointSolve,
    truth: &[f64],
    weight: WeightSpec,
) -> Result<Vec<f64>> {
    Ok(locate(problem, &oracle_quadratic(problem, ps, truth, weight)?).delta)
}
