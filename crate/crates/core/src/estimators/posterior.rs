use crate::error::{Error, Result};
use crate::estimators::hyperparams::{Hyperparams, Precision};
use crate::estimators::ls::rotate;
use crate::estimators::problem::{Needs, ShrinkageProblem};
use crate::estimators::result::{EstimateResult, SolverDiagnostics};
use crate::sparse_linalg::shifted::PriorScale;

/// Location vector `v = sum_k delta_k z_k`.
pub fn location_vector(problem: &ShrinkageProblem, delta: &[f64]) -> Result<Vec<f64>> {
    if delta.len() != problem.z().len() {
        return Err(Error::DimensionMismatch { expected: problem.z().len(), got: delta.len() });
    }
    let mut v = vec![0.0; problem.graph().dim()];
    for (d, z) in delta.iter().zip(problem.z()) {
        v.iter_mut().zip(z).for_each(|(x, zi)| *x += d * zi);
    }
    Ok(v)
}

/// Posterior mean `R{v + G^{-1} B'(Y - B v)}`.
///
/// `delta` gives the location coefficients; `None` uses `[hp.mu]`, which requires a
/// constant location. One or both precisions may sit at a limit:
/// both `Zero` returns the LS estimate, any `Infinite` uses the block-diagonal limit
/// of `G^{-1}` and requires `phi = 0`.
pub fn posterior_mean(problem: &ShrinkageProblem, hp: &Hyperparams, delta: Option<&[f64]>) -> Result<EstimateResult> {
    hp.validate()?;
    let mu = [hp.mu];
    let delta = delta.unwrap_or(&mu);
    let v = location_vector(problem, delta)?;
    let r = problem.rows();
    let (theta, diag) = match (hp.lambda_a, hp.lambda_b) {
        (Precision::Zero, Precision::Zero) => (problem.theta_ls().to_vec(), problem.ls_diagnostics().clone()),
        (la, lb) if la == Precision::Infinite || lb == Precision::Infinite => {
            if hp.phi != 0.0 {
                return Err(Error::InvalidHyperparams("an infinite precision requires phi = 0".into()));
            }
            (infinite_limit(problem, la, lb, &v)?, SolverDiagnostics::new("closed_form", 0, 0.0))
        }
        (la, lb) => {
            let scale = PriorScale::new(la.as_finite().unwrap(), lb.as_finite().unwrap(), hp.phi);
            let ps = problem.solve_point(scale, Needs::default())?;
            let method = if problem.has_direct_solver() { "direct" } else { "cg" };
            (ps.posterior(delta), SolverDiagnostics::new(method, ps.iterations, ps.residual))
        }
    };
    let mut est = EstimateResult::from_theta(&theta, r, diag);
    est.hyperparams = Some(*hp);
    est.location = delta.to_vec();
    est.sigma2 = Some(problem.sigma2());
    Ok(est)
}

fn infinite_limit(problem: &ShrinkageProblem, la: Precision, lb: Precision, v: &[f64]) -> Result<Vec<f64>> {
    let g = problem.graph();
    let r = g.rows();
    let lv = g.laplacian_apply(v)?;
    let mut t = v.to_vec();
    let sides = [(la, 0..r, g.row_degrees()), (lb, r..g.dim(), g.col_degrees())];
    for (prec, range, deg) in sides {
        if let Some(l) = prec.as_finite() {
            for (k, idx) in range.enumerate() {
                t[idx] += (problem.bty()[idx] - lv[idx]) / (deg[k] + l);
            }
        }
    }
    rotate(&mut t, r);
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::oneway::{one_way_shrink, projected_one_way_shrink};
    use crate::estimators::problem::ProblemOptions;
    use crate::sparse_linalg::shifted::dense_prior_precision;
    use crate::testutil::{random_graph, random_vec};
    use nalgebra::{DMatrix, DVector};

    fn problem(seed: u64) -> ShrinkageProblem {
        let g = random_graph(20, 10, 2, seed);
        let y = random_vec(g.n_obs(), seed + 100);
        ShrinkageProblem::new(g, y, ProblemOptions::default()).unwrap()
    }

    fn dense_rotation(r: usize, c: usize) -> DMatrix<f64> {
        let mut m = DMatrix::identity(r + c, r + c);
        for i in 0..r + c {
            let u = if i < r { 1.0 } else { -1.0 };
            for j in r..r + c {
                m[(i, j)] += u / c as f64;
            }
        }
        m
    }

    #[test]
    fn matches_dense_shrinkage_formula() {
        let p = problem(1);
        let hp = Hyperparams::new(0.3, 0.7, 2.0, 0.4).unwrap();
        let est = posterior_mean(&p, &hp, None).unwrap();
        let g = p.graph();
        let (r, c) = (g.rows(), g.cols());
        let lam = dense_prior_precision(g, hp.scale().unwrap());
        let gm = g.dense_laplacian() + &lam;
        let rot = dense_rotation(r, c);
        let s = &rot * gm.try_inverse().unwrap() * &lam;
        let s1 = &rot - &s;
        let mut v = vec![0.3; r];
        v.extend(vec![0.0; c]);
        let oracle = &s1 * DVector::from_column_slice(p.theta_ls()) + &s * DVector::from_vec(v);
        for (a, b) in est.theta().iter().zip(oracle.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(est.is_normalized());
    }

    #[test]
    fn small_and_large_precision_limits() {
        let p = problem(2);
        let near_ls = posterior_mean(&p, &Hyperparams::new(0.0, 1e-10, 1e-10, 0.0).unwrap(), None).unwrap();
        for (a, b) in near_ls.theta().iter().zip(p.theta_ls()) {
            assert!((a - b).abs() < 1e-4);
        }
        let near_prior = posterior_mean(&p, &Hyperparams::new(1.5, 1e10, 1e10, 0.0).unwrap(), None).unwrap();
        assert!(near_prior.alpha.iter().all(|a| (a - 1.5).abs() < 1e-6));
        assert!(near_prior.beta.iter().all(|b| b.abs() < 1e-6));
        let ls = posterior_mean(&p, &Hyperparams::with_limits(0.0, Precision::Zero, Precision::Zero, 0.0).unwrap(), None)
            .unwrap();
        assert_eq!(ls.theta(), p.theta_ls());
        let prior =
            posterior_mean(&p, &Hyperparams::with_limits(2.0, Precision::Infinite, Precision::Infinite, 0.0).unwrap(), None)
                .unwrap();
        assert!(prior.alpha.iter().all(|a| (a - 2.0).abs() < 1e-14));
        assert!(prior.beta.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn limit_flags_agree_with_one_way_forms() {
        let p = problem(3);
        let lb = 2.5;
        let big = posterior_mean(&p, &Hyperparams::new(0.0, 1e8, lb, 0.0).unwrap(), None).unwrap();
        let flag =
            posterior_mean(&p, &Hyperparams::with_limits(0.0, Precision::Infinite, Precision::Finite(lb), 0.0).unwrap(), None)
                .unwrap();
        let ow = one_way_shrink(p.graph(), p.outcomes(), Precision::Finite(lb)).unwrap();
        for ((a, b), c) in big.beta.iter().zip(&flag.beta).zip(&ow) {
            assert!((a - c).abs() < 1e-3);
            assert!((b - c).abs() < 1e-12);
        }
        let small = posterior_mean(&p, &Hyperparams::new(0.0, 1e-10, lb, 0.0).unwrap(), None).unwrap();
        let zero =
            posterior_mean(&p, &Hyperparams::with_limits(0.0, Precision::Zero, Precision::Finite(lb), 0.0).unwrap(), None)
                .unwrap();
        let proj = projected_one_way_shrink(p.graph(), p.theta_ls(), Precision::Finite(lb)).unwrap();
        for ((a, b), c) in small.beta.iter().zip(&zero.beta).zip(&proj) {
            assert!((a - c).abs() < 1e-4);
            assert!((b - c).abs() < 1e-8);
        }
        let bad = Hyperparams::with_limits(0.0, Precision::Infinite, Precision::Finite(lb), 0.3).unwrap();
        assert!(posterior_mean(&p, &bad, None).is_err());
    }

    #[test]
    fn linear_in_outcomes() {
        let g = random_graph(20, 10, 2, 4);
        let y1 = random_vec(g.n_obs(), 1);
        let y2 = random_vec(g.n_obs(), 2);
        let comb: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let hp = Hyperparams::new(0.0, 0.4, 1.1, -0.3).unwrap();
        let est = |y: Vec<f64>| {
            let p = ShrinkageProblem::new(g.clone(), y, ProblemOptions::default()).unwrap();
            posterior_mean(&p, &hp, None).unwrap().theta()
        };
        let (a, b, c) = (est(y1), est(y2), est(comb));
        for k in 0..a.len() {
            assert!((2.0 * a[k] - 0.5 * b[k] - c[k]).abs() < 1e-8);
        }
    }
}
