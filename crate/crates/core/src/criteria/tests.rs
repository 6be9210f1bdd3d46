use nalgebra::{DMatrix, DVector};

use super::*;
use crate::estimators::hyperparams::{Hyperparams, PriorLocation};
use crate::estimators::problem::{ProblemOptions, ShrinkageProblem};
use crate::estimators::posterior::posterior_mean;
use crate::estimators::problem::Needs;
use crate::hyperopt::concentrate::{concentrate_delta_ure, concentrate_mu_mle, concentrate_mu_ure, concentrate_oracle};
use crate::sparse_linalg::config::{SolverConfig, TraceMode};
use crate::sparse_linalg::shifted::{dense_prior_precision, PriorScale};
use crate::testutil::{random_graph, random_vec};

fn rotation(r: usize, c: usize) -> DMatrix<f64> {
    let mut m = DMatrix::identity(r + c, r + c);
    for i in 0..r + c {
        let u = if i < r { 1.0 } else { -1.0 };
        for j in r..r + c {
            m[(i, j)] += u / c as f64;
        }
    }
    m
}

fn problem_with(seed: u64, weight: WeightSpec, location: PriorLocation) -> ShrinkageProblem {
    let g = random_graph(20, 10, 2, seed);
    let y: Vec<f64> = random_vec(g.n_obs(), seed + 7).iter().map(|v| v + 0.8).collect();
    let solver = SolverConfig { trace_mode: TraceMode::Exact, ..SolverConfig::default() };
    ShrinkageProblem::new(g, y, ProblemOptions { weight, location, solver, ..ProblemOptions::default() }).unwrap()
}

fn problem(seed: u64) -> ShrinkageProblem {
    problem_with(seed, WeightSpec::AllEffects, PriorLocation::ConstantMu)
}

struct Dense {
    s: DMatrix<f64>,
    s1: DMatrix<f64>,
    lminus: DMatrix<f64>,
    w: DMatrix<f64>,
    theta_ls: DVector<f64>,
}

fn dense(p: &ShrinkageProblem, scale: PriorScale) -> Dense {
    let g = p.graph();
    let (r, c) = (g.rows(), g.cols());
    let lam = dense_prior_precision(g, scale);
    let l = g.dense_laplacian();
    let rot = rotation(r, c);
    let s = &rot * (&l + &lam).try_inverse().unwrap() * &lam;
    let s1 = &rot - &s;
    let lminus = &rot * l.pseudo_inverse(1e-12).unwrap() * rot.transpose();
    let w = DMatrix::from_diagonal(&DVector::from_vec(p.weight().diagonal(r, c)));
    Dense { s, s1, lminus, w, theta_ls: DVector::from_column_slice(p.theta_ls()) }
}

fn v_of(p: &ShrinkageProblem, mu: f64) -> DVector<f64> {
    let mut v = vec![mu; p.rows()];
    v.extend(vec![0.0; p.cols()]);
    DVector::from_vec(v)
}

/// Risk estimate written directly from its trace definition.
fn dense_ure(p: &ShrinkageProblem, scale: PriorScale, mu: f64) -> f64 {
    let d = dense(p, scale);
    let x = &d.theta_ls - v_of(p, mu);
    let sws = d.s.transpose() * &d.w * &d.s;
    let s1ws1 = d.s1.transpose() * &d.w * &d.s1;
    let s2 = p.sigma2();
    (&sws * &x * x.transpose()).trace() - s2 * (&sws * &d.lminus).trace() + s2 * (&s1ws1 * &d.lminus).trace()
}

#[test]
fn ure_matches_dense_definition_up_to_constant() {
    for weight in [WeightSpec::AllEffects, WeightSpec::BetaOnly, WeightSpec::AlphaOnly] {
        let p = problem_with(1, weight, PriorLocation::ConstantMu);
        for (mu, la, lb, phi) in [(0.0, 1.0, 1.0, 0.5), (0.4, 0.3, 2.0, -0.6), (1.0, 5.0, 0.05, 0.0)] {
            let hp = Hyperparams::new(mu, la, lb, phi).unwrap();
            let cv = ure(&p, &hp, None).unwrap();
            let want = dense_ure(&p, hp.scale().unwrap(), mu);
            assert!((cv.unbiased_risk().unwrap() - want).abs() < 1e-8, "{weight:?}: {} vs {want}", cv.value);
        }
    }
}

#[test]
fn ure_constant_is_ls_risk() {
    let p = problem(2);
    let d = dense(&p, PriorScale::new(1.0, 1.0, 0.0));
    let ls_risk = p.sigma2() * (&d.w * &d.lminus).trace();
    assert!((p.ls_risk().unwrap() - ls_risk).abs() < 1e-10);
    // S -> 0: the risk estimate tends to the LS risk
    let hp = Hyperparams::new(0.0, 1e-9, 1e-9, 0.0).unwrap();
    let cv = ure(&p, &hp, None).unwrap();
    assert!((cv.unbiased_risk().unwrap() - ls_risk).abs() < 1e-6);
}

#[test]
fn ure_with_covariate_location_matches_dense() {
    let za = DMatrix::from_fn(20, 1, |i, _| (i as f64 * 0.37).sin());
    let loc = PriorLocation::row_index_with_intercept(&za, &["x".into()]);
    let p = problem_with(3, WeightSpec::AllEffects, loc);
    let hp = Hyperparams::new(0.0, 0.8, 1.4, 0.3).unwrap();
    let delta = [0.5, -1.2];
    let cv = ure(&p, &hp, Some(&delta)).unwrap();
    let d = dense(&p, hp.scale().unwrap());
    let mut v = DVector::zeros(30);
    for (k, z) in p.z().iter().enumerate() {
        v += DVector::from_column_slice(z) * delta[k];
    }
    let x = &d.theta_ls - v;
    let sws = d.s.transpose() * &d.w * &d.s;
    let s1ws1 = d.s1.transpose() * &d.w * &d.s1;
    let s2 = p.sigma2();
    let want = (&sws * &x * x.transpose()).trace() - s2 * (&sws * &d.lminus).trace() + s2 * (&s1ws1 * &d.lminus).trace();
    assert!((cv.unbiased_risk().unwrap() - want).abs() < 1e-8);
}

fn dense_mle(p: &ShrinkageProblem, scale: PriorScale, mu: f64) -> f64 {
    let g = p.graph();
    let lam = dense_prior_precision(g, scale);
    let l = g.dense_laplacian();
    let gm = &l + &lam;
    let bty = DVector::from_column_slice(p.bty());
    let x = l.clone().pseudo_inverse(1e-12).unwrap() * bty - v_of(p, mu);
    let q = (gm.clone().try_inverse().unwrap() * &l * &x).dot(&(&lam * &x));
    p.sigma2() * (gm.determinant().ln() - lam.determinant().ln()) + q
}

#[test]
fn mle_matches_dense_formula() {
    let p = problem(4);
    for (mu, la, lb, phi) in [(0.0, 1.0, 1.0, 0.5), (0.7, 0.2, 3.0, -0.4)] {
        let hp = Hyperparams::new(mu, la, lb, phi).unwrap();
        let cv = marginal_neg_loglik(&p, &hp, None).unwrap();
        let want = dense_mle(&p, hp.scale().unwrap(), mu);
        assert!((cv.value - want).abs() < 1e-8 * want.abs().max(1.0), "{} vs {want}", cv.value);
    }
}

#[test]
fn mle_single_match_by_hand() {
    let g = crate::graph::BipartiteGraph::from_matches(1, 1, &[(0, 0)]).unwrap();
    let p = ShrinkageProblem::new(g, vec![2.0], ProblemOptions { sigma2: Some(0.5), ..ProblemOptions::default() }).unwrap();
    let (la, lb, mu) = (2.0, 3.0, 0.5);
    let cv = marginal_neg_loglik(&p, &Hyperparams::new(mu, la, lb, 0.0).unwrap(), None).unwrap();
    // G = [[1 + la, 1], [1, 1 + lb]]; H = L - L G^{-1} L = (la lb / det G) [[1, 1], [1, 1]]
    let det_g: f64 = (1.0 + la) * (1.0 + lb) - 1.0;
    let logdet = 0.5 * (det_g.ln() - (la * lb).ln());
    let x_sum: f64 = 2.0 - mu;
    let quad = la * lb / det_g * x_sum * x_sum;
    assert!((cv.value - (logdet + quad)).abs() < 1e-10);
}

#[test]
fn mle_location_equivariance() {
    let p = problem(5);
    let shifted_y: Vec<f64> = p.outcomes().iter().map(|v| v + 3.0).collect();
    let q = ShrinkageProblem::new(
        p.graph().clone(),
        shifted_y,
        ProblemOptions { sigma2: Some(p.sigma2()), solver: p.solver_config().clone(), ..ProblemOptions::default() },
    )
    .unwrap();
    let a = marginal_neg_loglik(&p, &Hyperparams::new(0.2, 0.5, 0.5, 0.1).unwrap(), None).unwrap();
    let b = marginal_neg_loglik(&q, &Hyperparams::new(3.2, 0.5, 0.5, 0.1).unwrap(), None).unwrap();
    assert!((a.value - b.value).abs() < 1e-9);
    let s = PriorScale::new(0.5, 0.5, 0.1);
    let m1 = concentrate_mu_mle(&p, s).unwrap();
    let m2 = concentrate_mu_mle(&q, s).unwrap();
    assert!((m2 - m1 - 3.0).abs() < 1e-9);
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    (a + b) / 2.0
}

#[test]
fn concentrated_means_match_numeric_minimization() {
    let p = problem(6);
    let s = PriorScale::new(0.6, 1.7, 0.35);
    let mu = concentrate_mu_ure(&p, s).unwrap();
    let num = golden_section(|m| dense_ure(&p, s, m), -5.0, 5.0);
    assert!((mu - num).abs() < 1e-6, "{mu} vs {num}");
    let mu = concentrate_mu_mle(&p, s).unwrap();
    let num = golden_section(|m| dense_mle(&p, s, m), -5.0, 5.0);
    assert!((mu - num).abs() < 1e-6, "{mu} vs {num}");
    // quadratic minimum beats 20 random alternatives
    let hp = |m: f64| Hyperparams::new(m, s.lambda_a, s.lambda_b, s.phi).unwrap();
    let best = ure(&p, &hp(concentrate_mu_ure(&p, s).unwrap()), None).unwrap().value;
    for m in random_vec(20, 8) {
        assert!(best <= ure(&p, &hp(3.0 * m), None).unwrap().value + 1e-12);
    }
}

#[test]
fn oracle_location_matches_numeric_minimization() {
    let p = problem(9);
    let truth: Vec<f64> = random_vec(p.rows() + p.cols(), 41).iter().map(|v| 0.5 * v).collect();
    let truth = {
        let mut t = truth;
        let m = t[p.rows()..].iter().sum::<f64>() / p.cols() as f64;
        t[p.rows()..].iter_mut().for_each(|b| *b -= m);
        t
    };
    let s = PriorScale::new(0.8, 0.5, -0.3);
    for w in [WeightSpec::AllEffects, WeightSpec::BetaOnly] {
        let ps = p.solve_point(s, Needs { trace: false, logdet: false }).unwrap();
        let mu = concentrate_oracle(&p, &ps, &truth, w).unwrap()[0];
        let loss = |m: f64| {
            let hp = Hyperparams::new(m, s.lambda_a, s.lambda_b, s.phi).unwrap();
            compound_loss(&posterior_mean(&p, &hp, None).unwrap().theta(), &truth, p.rows(), w).unwrap()
        };
        let free = oracle_quadratic(&p, &ps, &truth, w).unwrap().minimize().delta[0];
        let num = golden_section(loss, -50.0, 50.0);
        assert!((free - num).abs() < 1e-6, "{w:?}: {free} vs {num}");
        let (lo, hi) = p.mu_range();
        let num = golden_section(loss, lo, hi);
        assert!((mu - num).abs() < 1e-6, "{w:?}: {mu} vs {num} in [{lo}, {hi}]");
    }
}

#[test]
fn concentrated_delta_is_stationary_and_specializes() {
    let za = DMatrix::from_fn(20, 1, |i, _| (i as f64 * 0.91).cos());
    let loc = PriorLocation::row_index_with_intercept(&za, &["x".into()]);
    let p = problem_with(7, WeightSpec::AllEffects, loc);
    let s = PriorScale::new(0.4, 0.9, -0.2);
    let delta = concentrate_delta_ure(&p, s).unwrap();
    let hp = Hyperparams::new(0.0, s.lambda_a, s.lambda_b, s.phi).unwrap();
    let f = |d: &[f64]| ure(&p, &hp, Some(d)).unwrap().value;
    let best = f(&delta);
    for dir in [[1.0, 0.0], [0.0, 1.0], [0.7, -0.7], [0.3, 0.9]] {
        for h in [1e-3, -1e-3, 0.5, -0.5] {
            let d = [delta[0] + h * dir[0], delta[1] + h * dir[1]];
            assert!(f(&d) >= best - 1e-12);
        }
    }
    assert!(best <= f(&[0.0, 0.0]));
    // an intercept-only index reduces to the constant mean
    let only = PriorLocation::CovariateIndex {
        za: DMatrix::from_element(20, 1, 1.0),
        zb: DMatrix::zeros(0, 0),
        names: vec!["intercept".into()],
    };
    let p1 = problem_with(7, WeightSpec::AllEffects, only);
    let p0 = problem(7);
    let d1 = concentrate_delta_ure(&p1, s).unwrap();
    let m0 = concentrate_mu_ure(&p0, s).unwrap();
    assert!((d1[0] - m0).abs() < 1e-12);
}

#[test]
fn degenerate_location_falls_back() {
    let p = problem(8);
    // S -> 0 kills the curvature in mu
    let mu = concentrate_mu_ure(&p, PriorScale::new(1e-300, 1e-300, 0.0)).unwrap();
    assert_eq!(mu, 0.0);
    let zb_only = PriorLocation::CovariateIndex {
        za: DMatrix::zeros(20, 0),
        zb: DMatrix::from_element(10, 1, 1.0),
        names: vec!["flat".into()],
    };
    // a constant column on the beta side is removed by centring
    let q = problem_with(8, WeightSpec::AllEffects, zb_only);
    let d = concentrate_delta_ure(&q, PriorScale::new(1.0, 1.0, 0.0)).unwrap();
    assert_eq!(d, vec![0.0]);
}

#[test]
fn hutchinson_mode_is_unbiased_for_exact() {
    let g = random_graph(20, 10, 2, 9);
    let y = random_vec(g.n_obs(), 9);
    let exact = ShrinkageProblem::new(
        g.clone(),
        y.clone(),
        ProblemOptions { solver: SolverConfig { trace_mode: TraceMode::Exact, ..Default::default() }, ..Default::default() },
    )
    .unwrap();
    let hp = Hyperparams::new(0.1, 0.5, 1.5, 0.3).unwrap();
    let want = ure(&exact, &hp, None).unwrap().value;
    let vals: Vec<f64> = (0..60)
        .map(|seed| {
            let solver = SolverConfig { trace_mode: TraceMode::Hutchinson, probes: 8, seed, ..Default::default() };
            let p = ShrinkageProblem::new(g.clone(), y.clone(), ProblemOptions { solver, ..Default::default() }).unwrap();
            let cv = ure(&p, &hp, None).unwrap();
            assert_eq!(cv.trace.seed, Some(seed));
            cv.value
        })
        .collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let se = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!((mean - want).abs() < 3.0 * se, "{mean} vs {want} (se {se})");
}
