use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::mle::{mle_from_solve, mle_quadratic};
use crate::criteria::oracle::oracle_quadratic;
use crate::criteria::ure::{ure_from_solve, ure_quadratic};
use crate::criteria::value::{Components, Criterion, CriterionValue, TraceInfo};
use crate::criteria::weights::WeightSpec;
use crate::error::{Error, Result};
use crate::estimators::hyperparams::{Hyperparams, PriorLocation};
use crate::estimators::posterior::posterior_mean;
use crate::estimators::problem::{Needs, PointSolve, ShrinkageProblem};
use crate::estimators::result::EstimateResult;
use crate::hyperopt::concentrate::locate;
use crate::hyperopt::grid::{cartesian, refine_axis, GridSpec, MuHandling};
use crate::sparse_linalg::shifted::PriorScale;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub phi: f64,
    /// First location coefficient.
    pub mu: f64,
    pub value: f64,
    /// 0 for the coarse grid, k for the k-th refinement round.
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub phi: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub criterion: Criterion,
    pub hyperparams: Hyperparams,
    /// Location coefficients at the argmin (`[mu]` for a constant location).
    pub location: Vec<f64>,
    pub value: CriterionValue,
    /// True when the location system was singular at the argmin.
    pub degenerate_location: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surface: Option<Vec<SurfacePoint>>,
    pub evaluations: usize,
    pub failures: Vec<PointFailure>,
    /// Conjugate-gradient iterations summed over all evaluations.
    pub solver_iterations: usize,
    pub elapsed_secs: f64,
}

impl SelectionResult {
    /// Posterior mean at the selected hyperparameters.
    pub fn estimate(&self, problem: &ShrinkageProblem) -> Result<EstimateResult> {
        let mut est = posterior_mean(problem, &self.hyperparams, Some(&self.location))?;
        est.criterion = Some(self.value.value);
        Ok(est)
    }
}

/// Evaluation of one criterion at one point.
#[derive(Debug, Clone)]
struct Eval {
    value: f64,
    delta: Vec<f64>,
    degenerate: bool,
}

struct Context<'a> {
    problem: &'a ShrinkageProblem,
    grid: &'a GridSpec,
    truth: Option<&'a [f64]>,
    oracle_weight: WeightSpec,
}

impl Context<'_> {
    fn needs(&self, criteria: &[Criterion]) -> Needs {
        Needs { trace: criteria.contains(&Criterion::Ure), logdet: criteria.contains(&Criterion::Mle) }
    }

    fn quadratic(&self, c: Criterion, ps: &PointSolve) -> Result<crate::criteria::LocationQuadratic> {
        Ok(match c {
            Criterion::Ure => ure_quadratic(self.problem, ps),
            Criterion::Mle => mle_quadratic(self.problem, ps),
            Criterion::Oracle => {
                let truth = self.truth.ok_or_else(|| Error::InvalidInput("oracle selection needs true effects".into()))?;
                oracle_quadratic(self.problem, ps, truth, self.oracle_weight)?
            }
        })
    }

    fn fixed_term(&self, c: Criterion, ps: &PointSolve) -> f64 {
        let s2 = self.problem.sigma2();
        match c {
            Criterion::Ure => 2.0 * s2 * ps.trace.unwrap_or(f64::NAN),
            Criterion::Mle => s2 * (ps.logdet_g.unwrap_or(f64::NAN) - ps.logdet_prior.unwrap_or(f64::NAN)),
            Criterion::Oracle => 0.0,
        }
    }

    fn eval_point(&self, p: [f64; 3], criteria: &[Criterion]) -> Result<(Vec<Eval>, usize)> {
        let ps = self.problem.solve_point(PriorScale::new(p[0], p[1], p[2]), self.needs(criteria))?;
        let mut out = Vec::with_capacity(criteria.len());
        for &c in criteria {
            let q = self.quadratic(c, &ps)?;
            let (delta, degenerate) = match self.grid.mu {
                MuHandling::Concentrated => {
                    let m = locate(self.problem, &q);
                    (m.delta, m.degenerate)
                }
                MuHandling::Fixed(mu) => (vec![mu], false),
            };
            let value = self.fixed_term(c, &ps) + q.eval(&delta);
            if !value.is_finite() {
                return Err(Error::NonFinite("criterion value"));
            }
            out.push(Eval { value, delta, degenerate });
        }
        Ok((out, ps.iterations))
    }

    fn full_value(&self, c: Criterion, p: [f64; 3], delta: &[f64]) -> Result<CriterionValue> {
        let ps = self.problem.solve_point(PriorScale::new(p[0], p[1], p[2]), self.needs(&[c]))?;
        match c {
            Criterion::Ure => ure_from_solve(self.problem, &ps, delta),
            Criterion::Mle => mle_from_solve(self.problem, &ps, delta),
            Criterion::Oracle => {
                let loss = self.quadratic(c, &ps)?.eval(delta);
                Ok(CriterionValue {
                    criterion: Criterion::Oracle,
                    value: loss,
                    components: Components { quadratic: loss, ..Components::default() },
                    location: delta.to_vec(),
                    trace: TraceInfo::of(self.problem),
                })
            }
        }
    }
}

#[derive(Default)]
struct Track {
    records: Vec<([f64; 3], Eval, usize)>,
    failures: Vec<PointFailure>,
    iterations: usize,
    evaluations: usize,
}

impl Track {
    fn best(&self) -> Option<&([f64; 3], Eval, usize)> {
        self.records.iter().min_by(|a, b| {
            a.1.value
                .total_cmp(&b.1.value)
                .then(a.0[0].total_cmp(&b.0[0]))
                .then(a.0[1].total_cmp(&b.0[1]))
                .then(a.0[2].total_cmp(&b.0[2]))
        })
    }
}

fn evaluate_all(ctx: &Context<'_>, points: &[[f64; 3]], criteria: &[Criterion], round: usize, tracks: &mut [Track]) {
    let results: Vec<Result<(Vec<Eval>, usize)>> = points.par_iter().map(|&p| ctx.eval_point(p, criteria)).collect();
    for (p, res) in points.iter().zip(results) {
        for t in tracks.iter_mut() {
            t.evaluations += 1;
        }
        match res {
            Ok((evals, it)) => {
                for (t, e) in tracks.iter_mut().zip(evals) {
                    t.iterations += it;
                    t.records.push((*p, e, round));
                }
            }
            Err(e) => {
                log::debug!("grid point {p:?} failed: {e}");
                for t in tracks.iter_mut() {
                    t.failures.push(PointFailure { lambda_a: p[0], lambda_b: p[1], phi: p[2], error: e.to_string() });
                }
            }
        }
    }
}

/// Grid search for several criteria sharing one solve per grid point. Refinement
/// points of every criterion are evaluated for all of them, so all criteria see the
/// same final grid.
///
/// `truth` is required when `criteria` contains [`Criterion::Oracle`]; the oracle
/// loss uses `oracle_weight`.
pub fn select_many(
    problem: &ShrinkageProblem,
    criteria: &[Criterion],
    grid: &GridSpec,
    truth: Option<&[f64]>,
    oracle_weight: WeightSpec,
) -> Result<Vec<SelectionResult>> {
    grid.validate()?;
    if let MuHandling::Fixed(_) = grid.mu {
        if !matches!(problem.location(), PriorLocation::ConstantMu) {
            return Err(Error::InvalidInput("a fixed mu needs a constant prior location".into()));
        }
    }
    if criteria.contains(&Criterion::Oracle) && truth.is_none() {
        return Err(Error::InvalidInput("oracle selection needs true effects".into()));
    }
    let start = Instant::now();
    let ctx = Context { problem, grid, truth, oracle_weight };
    let mut tracks: Vec<Track> = criteria.iter().map(|_| Track::default()).collect();
    let coarse = grid.points();
    evaluate_all(&ctx, &coarse, criteria, 0, &mut tracks);
    let mut axes: Vec<[Vec<f64>; 3]> =
        criteria.iter().map(|_| [grid.lambda_a.clone(), grid.lambda_b.clone(), grid.phi.clone()]).collect();
    let mut seen: std::collections::HashSet<[u64; 3]> = coarse.iter().map(|p| p.map(f64::to_bits)).collect();
    for round in 1..=grid.refinement_rounds {
        let mut fresh = Vec::new();
        for (ci, track) in tracks.iter().enumerate() {
            let Some(best) = track.best().map(|b| b.0) else { continue };
            let ax = &mut axes[ci];
            ax[0] = refine_axis(&ax[0], best[0], grid.refinement_density, true);
            ax[1] = refine_axis(&ax[1], best[1], grid.refinement_density, true);
            ax[2] = refine_axis(&ax[2], best[2], grid.refinement_density, false);
            for p in cartesian(&ax[0], &ax[1], &ax[2]) {
                if seen.insert(p.map(f64::to_bits)) {
                    fresh.push(p);
                }
            }
        }
        evaluate_all(&ctx, &fresh, criteria, round, &mut tracks);
    }
    let elapsed = start.elapsed().as_secs_f64();

    let mut out = Vec::with_capacity(criteria.len());
    for (ci, &c) in criteria.iter().enumerate() {
        let track = &mut tracks[ci];
        if track.best().is_none() {
            return Err(Error::AllGridPointsFailed(track.failures.len()));
        }
        let (p, eval, _) = track.best().unwrap().clone();
        let value = ctx.full_value(c, p, &eval.delta)?;
        let mu = match problem.location() {
            PriorLocation::ConstantMu => eval.delta[0],
            _ => 0.0,
        };
        let surface = grid.keep_surface.then(|| {
            track
                .records
                .iter()
                .map(|(p, e, round)| SurfacePoint {
                    lambda_a: p[0],
                    lambda_b: p[1],
                    phi: p[2],
                    mu: e.delta.first().copied().unwrap_or(0.0),
                    value: e.value,
                    round: *round,
                })
                .collect()
        });
        out.push(SelectionResult {
            criterion: c,
            hyperparams: Hyperparams::new(mu, p[0], p[1], p[2])?,
            location: eval.delta.clone(),
            value,
            degenerate_location: eval.degenerate,
            surface,
            evaluations: track.evaluations,
            failures: std::mem::take(&mut track.failures),
            solver_iterations: track.iterations,
            elapsed_secs: elapsed,
        });
    }
    Ok(out)
}

/// Minimizes the risk estimate or the likelihood criterion over `grid`.
pub fn select(problem: &ShrinkageProblem, criterion: Criterion, grid: &GridSpec) -> Result<SelectionResult> {
    if criterion == Criterion::Oracle {
        return Err(Error::InvalidInput("use select_oracle for the oracle loss".into()));
    }
    Ok(select_many(problem, &[criterion], grid, None, problem.weight())?.remove(0))
}

/// Minimizes the compound loss against known effects over `grid`.
pub fn select_oracle(
    problem: &ShrinkageProblem,
    truth: &[f64],
    grid: &GridSpec,
    weight: WeightSpec,
) -> Result<SelectionResult> {
    Ok(select_many(problem, &[Criterion::Oracle], grid, Some(truth), weight)?.remove(0))
}

/// Compound loss at every grid point, with the location concentrated per point.
pub fn oracle_loss_curve(
    problem: &ShrinkageProblem,
    truth: &[f64],
    grid: &GridSpec,
    weight: WeightSpec,
) -> Result<Vec<SurfacePoint>> {
    let g = GridSpec { refinement_rounds: 0, keep_surface: true, ..grid.clone() };
    let res = select_oracle(problem, truth, &g, weight)?;
    Ok(res.surface.unwrap_or_default())
}
