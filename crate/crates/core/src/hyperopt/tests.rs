use super::*;
use crate::criteria::{compound_loss, marginal_neg_loglik, ure, Criterion, WeightSpec};
use crate::estimators::hyperparams::Hyperparams;
use crate::estimators::ls::rotate;
use crate::estimators::posterior::posterior_mean;
use crate::estimators::problem::{ProblemOptions, ShrinkageProblem};
use crate::sparse_linalg::config::{SolverConfig, TraceMode};
use crate::testutil::{random_graph, random_vec};

fn simulated(seed: u64, noise: f64, mode: TraceMode) -> (ShrinkageProblem, Vec<f64>) {
    let g = random_graph(30, 8, 2, seed);
    let mut theta: Vec<f64> = random_vec(g.dim(), seed + 1).iter().map(|v| 0.5 * v).collect();
    rotate(&mut theta, g.rows());
    let e = random_vec(g.n_obs(), seed + 2);
    let y: Vec<f64> = g.b_apply(&theta).unwrap().iter().zip(&e).map(|(m, e)| m + noise * e).collect();
    let solver = SolverConfig { trace_mode: mode, probes: 16, seed: 5, ..SolverConfig::default() };
    (ShrinkageProblem::new(g, y, ProblemOptions { solver, ..ProblemOptions::default() }).unwrap(), theta)
}

fn small_grid() -> GridSpec {
    GridSpec { refinement_rounds: 1, ..GridSpec::regular((1e-3, 1e3, 7), (-0.6, 0.6, 5)) }
}

#[test]
fn single_point_grid_returns_that_point() {
    let (p, _) = simulated(1, 0.5, TraceMode::Exact);
    let grid = GridSpec::single(0.5, 2.0, 0.3);
    for c in [Criterion::Ure, Criterion::Mle] {
        let res = select(&p, c, &grid).unwrap();
        assert_eq!(res.evaluations, 1);
        assert_eq!((res.hyperparams.scale().unwrap().lambda_a, res.hyperparams.phi), (0.5, 0.3));
        let hp = res.hyperparams;
        let again = match c {
            Criterion::Ure => ure(&p, &hp, None).unwrap(),
            _ => marginal_neg_loglik(&p, &hp, None).unwrap(),
        };
        assert_eq!(again.value, res.value.value);
    }
}

#[test]
fn reported_value_matches_reevaluation_and_grid_minimum() {
    let (p, _) = simulated(2, 0.5, TraceMode::Exact);
    let grid = GridSpec { keep_surface: true, ..small_grid() };
    let res = select(&p, Criterion::Ure, &grid).unwrap();
    let again = ure(&p, &res.hyperparams, None).unwrap();
    assert_eq!(again.value, res.value.value);
    let surface = res.surface.unwrap();
    assert!(surface.iter().all(|s| s.value >= res.value.value));
    assert!(surface.iter().any(|s| s.round == 1));
    // concentration: the per-point mean beats alternatives inside the allowed range
    let (lo, hi) = p.mu_range();
    for s in surface.iter().step_by(37) {
        let best = ure(&p, &Hyperparams::new(s.mu, s.lambda_a, s.lambda_b, s.phi).unwrap(), None).unwrap().value;
        for m in random_vec(20, 3) {
            let alt = Hyperparams::new((s.mu + m).clamp(lo, hi), s.lambda_a, s.lambda_b, s.phi).unwrap();
            let v = ure(&p, &alt, None).unwrap().value;
            assert!(best <= v + 1e-9 * v.abs().max(1.0), "{best} > {v} at {s:?}");
        }
    }
}

#[test]
fn oracle_is_best_on_the_shared_grid() {
    let (p, theta) = simulated(3, 1.0, TraceMode::Exact);
    let grid = small_grid();
    let res = select_many(&p, &[Criterion::Ure, Criterion::Mle, Criterion::Oracle], &grid, Some(&theta), WeightSpec::AllEffects)
        .unwrap();
    let loss = |r: &SelectionResult| {
        let est = r.estimate(&p).unwrap();
        compound_loss(&est.theta(), &theta, p.rows(), WeightSpec::AllEffects).unwrap()
    };
    let (lu, lm, lo) = (loss(&res[0]), loss(&res[1]), loss(&res[2]));
    assert!((lo - res[2].value.value).abs() < 1e-12);
    assert!(lo <= lu && lo <= lm);
    let ls = compound_loss(p.theta_ls(), &theta, p.rows(), WeightSpec::AllEffects).unwrap();
    assert!(lo <= ls + 1e-3 * ls);
}

#[test]
fn oracle_curve_corner_cases() {
    // noiseless: the loss is smallest at the weakest shrinkage
    let (p, theta) = simulated(4, 0.0, TraceMode::Exact);
    let grid = GridSpec { refinement_rounds: 0, ..GridSpec::regular((1e-4, 1e2, 4), (0.0, 0.0, 1)) };
    let curve = oracle_loss_curve(&p, &theta, &grid, WeightSpec::AllEffects).unwrap();
    let best = curve.iter().min_by(|a, b| a.value.total_cmp(&b.value)).unwrap();
    assert_eq!((best.lambda_a, best.lambda_b), (1e-4, 1e-4));
    // truth equal to the prior mean: more shrinkage is better along the diagonal
    let g = p.graph().clone();
    let mut truth = vec![0.7; g.rows()];
    truth.extend(vec![0.0; g.cols()]);
    let y: Vec<f64> = g.b_apply(&truth).unwrap().iter().zip(random_vec(g.n_obs(), 9)).map(|(m, e)| m + 3.0 * e).collect();
    let q = ShrinkageProblem::new(g, y, ProblemOptions::default()).unwrap();
    let grid = GridSpec { mu: MuHandling::Fixed(0.7), ..grid };
    let curve = oracle_loss_curve(&q, &truth, &grid, WeightSpec::AllEffects).unwrap();
    let diag: Vec<f64> = curve.iter().filter(|s| s.lambda_a == s.lambda_b).map(|s| s.value).collect();
    assert!(diag.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn hutchinson_selection_is_reproducible() {
    let (p, _) = simulated(5, 0.5, TraceMode::Hutchinson);
    let (q, _) = simulated(5, 0.5, TraceMode::Hutchinson);
    let grid = GridSpec::regular((1e-2, 1e2, 4), (-0.5, 0.5, 3));
    let mut a = select(&p, Criterion::Ure, &grid).unwrap();
    let mut b = select(&q, Criterion::Ure, &grid).unwrap();
    a.elapsed_secs = 0.0;
    b.elapsed_secs = 0.0;
    assert_eq!(a, b);
    assert_eq!(a.value.trace.probes, Some(16));
}

#[test]
fn posterior_at_selection_is_normalized() {
    let (p, _) = simulated(6, 0.5, TraceMode::Auto);
    let res = select(&p, Criterion::Mle, &small_grid()).unwrap();
    let est = posterior_mean(&p, &res.hyperparams, None).unwrap();
    assert!(est.is_normalized());
}

