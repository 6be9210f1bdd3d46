use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::criteria::weights::{weighted_dot, WeightSpec};
use crate::error::{Error, Result};
use crate::estimators::hyperparams::PriorLocation;
use crate::estimators::ls::{cg_params, laplacian_solve_rotated, require_connected, rotate, rotate_transpose, sigma2_from_fit};
use crate::estimators::result::SolverDiagnostics;
use crate::graph::bipartite::BipartiteGraph;
use crate::sparse_linalg::cg::{cg_solve, CgParams};
use crate::sparse_linalg::config::{SolverConfig, TraceMode};
use crate::sparse_linalg::hutchinson::{hutchinson_samples, ProbeSet, TraceEstimate};
use crate::sparse_linalg::shifted::{BlockTraces, PriorScale, ReducedFactor, ReducedSystem, ShiftedPrecisionOperator};

/// Settings of a [`ShrinkageProblem`].
#[derive(Debug, Clone)]
pub struct ProblemOptions {
    /// Known noise variance; estimated from the LS residuals when `None`.
    pub sigma2: Option<f64>,
    pub weight: WeightSpec,
    pub location: PriorLocation,
    pub solver: SolverConfig,
    /// Per-observation noise variances. Reserved for a heteroskedastic risk estimate,
    /// which is not implemented; supplying it is an error.
    pub obs_variance: Option<Vec<f64>>,
}

impl Default for ProblemOptions {
    fn default() -> Self {
        ProblemOptions {
            sigma2: None,
            weight: WeightSpec::AllEffects,
            location: PriorLocation::ConstantMu,
            solver: SolverConfig::default(),
            obs_variance: None,
        }
    }
}

/// How trace terms are evaluated for a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceBackend {
    Exact,
    Hutchinson,
}

/// What a point solve should compute beyond the posterior pieces.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Needs {
    pub trace: bool,
    pub logdet: bool,
}

/// Everything the criteria need at one prior scale.
#[derive(Debug, Clone)]
pub struct PointSolve {
    pub scale: PriorScale,
    /// `G^{-1} B'Y`.
    pub a: Vec<f64>,
    /// `R a`, the data part of the posterior mean.
    pub ra: Vec<f64>,
    /// `S theta_ls = theta_ls - R a`.
    pub s_ls: Vec<f64>,
    /// `G^{-1} L z_k` per location column.
    pub g_z: Vec<Vec<f64>>,
    /// `S z_k = R (z_k - G^{-1} L z_k)`.
    pub s_z: Vec<Vec<f64>>,
    /// `tr[W R G^{-1} R']`.
    pub trace: Option<f64>,
    pub trace_std_err: Option<f64>,
    pub logdet_g: Option<f64>,
    pub logdet_prior: Option<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl PointSolve {
    /// Posterior mean `R a + sum_k delta_k S z_k`.
    pub fn posterior(&self, delta: &[f64]) -> Vec<f64> {
        let mut t = self.ra.clone();
        for (d, sz) in delta.iter().zip(&self.s_z) {
            t.iter_mut().zip(sz).for_each(|(x, s)| *x += d * s);
        }
        t
    }
}

enum Solver<'a> {
    Direct(ReducedFactor<'a>),
    Cg { op: Box<dyn Fn(&[f64], &mut [f64]) + Sync + 'a>, diag: Vec<f64>, params: CgParams },
}

impl Solver<'_> {
    fn solve(&self, b: &[f64], stats: &mut (usize, f64)) -> Result<Vec<f64>> {
        match self {
            Solver::Direct(f) => Ok(f.solve(b)),
            Solver::Cg { op, diag, params } => {
                let out = cg_solve(|v, o| op(v, o), Some(diag), b, *params)?;
                stats.0 += out.iterations;
                stats.1 = stats.1.max(out.residual);
                Ok(out.x)
            }
        }
    }
}

/// Immutable data bundle against which every criterion is evaluated.
pub struct ShrinkageProblem {
    graph: BipartiteGraph,
    y: Vec<f64>,
    bty: Vec<f64>,
    sum_y: f64,
    theta_ls: Vec<f64>,
    ls_diagnostics: SolverDiagnostics,
    sigma2: f64,
    sigma2_estimated: bool,
    weight: WeightSpec,
    location: PriorLocation,
    z: Vec<Vec<f64>>,
    lz: Vec<Vec<f64>>,
    solver: SolverConfig,
    reduced: Option<ReducedSystem>,
    backend: TraceBackend,
    probes: Option<ProbeSet>,
    mu_range: (f64, f64),
    ls_risk: OnceLock<Option<f64>>,
    logdet_corr: Mutex<HashMap<u64, f64>>,
}

impl std::fmt::Debug for ShrinkageProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShrinkageProblem")
            .field("rows", &self.graph.rows())
            .field("cols", &self.graph.cols())
            .field("n_obs", &self.graph.n_obs())
            .field("sigma2", &self.sigma2)
            .field("weight", &self.weight)
            .field("backend", &self.backend)
            .finish()
    }
}

impl ShrinkageProblem {
    pub fn new(graph: BipartiteGraph, y: Vec<f64>, opts: ProblemOptions) -> Result<Self> {
        opts.solver.validate()?;
        if opts.obs_variance.is_some() {
            return Err(Error::InvalidInput("heteroskedastic risk estimation is not implemented".into()));
        }
        if y.len() != graph.n_obs() {
            return Err(Error::DimensionMismatch { expected: graph.n_obs(), got: y.len() });
        }
        if let Some(index) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteOutcome { index });
        }
        require_connected(&graph)?;
        if graph.cols() == 1 {
            log::warn!("a single column unit forces beta = 0; only row effects are estimated");
        }
        let reduced = match opts.solver.trace_mode {
            TraceMode::Exact => Some(ReducedSystem::new(&graph, opts.solver.max_fill).ok_or_else(|| {
                Error::ExactTraceUnavailable(format!(
                    "sparse factor exceeds max_fill = {}; use trace_mode = hutchinson",
                    opts.solver.max_fill
                ))
            })?),
            _ => ReducedSystem::new(&graph, opts.solver.max_fill),
        };
        let backend = match (opts.solver.trace_mode, &reduced) {
            (TraceMode::Hutchinson, _) | (TraceMode::Auto, None) => TraceBackend::Hutchinson,
            _ => TraceBackend::Exact,
        };
        let bty = graph.bt_apply(&y)?;
        let (theta_ls, ls_diagnostics) = match &reduced {
            Some(sys) => {
                let f = sys.factor_grounded(false)?;
                let mut x = f.solve(&bty);
                rotate(&mut x, graph.rows());
                (x, SolverDiagnostics::new("direct", 0, 0.0))
            }
            None => {
                let (x, it, res) = laplacian_solve_rotated(&graph, &bty, &opts.solver)?;
                (x, SolverDiagnostics::new("cg", it, res))
            }
        };
        let (sigma2, sigma2_estimated) = match opts.sigma2 {
            Some(s) if s.is_finite() && s >= 0.0 => (s, false),
            Some(s) => return Err(Error::InvalidInput(format!("sigma2 must be finite and nonnegative, got {s}"))),
            None => (sigma2_from_fit(&graph, &y, &theta_ls)?, true),
        };
        let z = opts.location.columns(graph.rows(), graph.cols())?;
        let lz = z.iter().map(|v| graph.laplacian_apply(v)).collect::<Result<Vec<_>>>()?;
        let probes = (backend == TraceBackend::Hutchinson).then(|| {
            ProbeSet::draw(graph.dim(), opts.solver.probes, opts.solver.probe_distribution, opts.solver.seed)
        });
        let n = y.len() as f64;
        let sum_y: f64 = y.iter().sum();
        let mean = sum_y / n;
        let sd = if y.len() > 1 {
            (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(ShrinkageProblem {
            graph,
            y,
            bty,
            sum_y,
            theta_ls,
            ls_diagnostics,
            sigma2,
            sigma2_estimated,
            weight: opts.weight,
            location: opts.location,
            z,
            lz,
            solver: opts.solver,
            reduced,
            backend,
            probes,
            mu_range: (mean - 10.0 * sd, mean + 10.0 * sd),
            ls_risk: OnceLock::new(),
            logdet_corr: Mutex::new(HashMap::new()),
        })
    }

    pub fn graph(&self) -> &BipartiteGraph {
        &self.graph
    }

    pub fn rows(&self) -> usize {
        self.graph.rows()
    }

    pub fn cols(&self) -> usize {
        self.graph.cols()
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.y
    }

    /// `B'Y`.
    pub fn bty(&self) -> &[f64] {
        &self.bty
    }

    pub fn sum_y(&self) -> f64 {
        self.sum_y
    }

    pub fn theta_ls(&self) -> &[f64] {
        &self.theta_ls
    }

    pub fn ls_diagnostics(&self) -> &SolverDiagnostics {
        &self.ls_diagnostics
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma2_is_estimated(&self) -> bool {
        self.sigma2_estimated
    }

    pub fn weight(&self) -> WeightSpec {
        self.weight
    }

    pub fn block_weights(&self) -> (f64, f64) {
        self.weight.block_weights(self.rows(), self.cols())
    }

    pub fn location(&self) -> &PriorLocation {
        &self.location
    }

    /// Location design columns over `(alpha, beta)`.
    pub fn z(&self) -> &[Vec<f64>] {
        &self.z
    }

    /// `L z_k`.
    pub fn lz(&self) -> &[Vec<f64>] {
        &self.lz
    }

    pub fn solver_config(&self) -> &SolverConfig {
        &self.solver
    }

    pub fn backend(&self) -> TraceBackend {
        self.backend
    }

    pub fn has_direct_solver(&self) -> bool {
        self.reduced.is_some()
    }

    pub fn probes(&self) -> Option<&ProbeSet> {
        self.probes.as_ref()
    }

    /// Admissible range for a constant prior mean: `mean(Y) +- 10 sd(Y)`.
    pub fn mu_range(&self) -> (f64, f64) {
        self.mu_range
    }

    pub fn weighted_dot(&self, x: &[f64], y: &[f64]) -> f64 {
        weighted_dot(x, y, self.rows(), self.block_weights())
    }

    /// Gram matrix `z_k' L z_l`.
    pub fn z_l_z(&self) -> DMatrix<f64> {
        let k = self.z.len();
        DMatrix::from_fn(k, k, |i, j| dot(&self.z[i], &self.lz[j]))
    }

    fn solver_at(&self, scale: PriorScale, exact_traces: bool) -> Result<Solver<'_>> {
        match &self.reduced {
            Some(sys) => Ok(Solver::Direct(sys.factor_shifted(scale, exact_traces)?)),
            None => {
                let op = ShiftedPrecisionOperator::new(&self.graph, scale)?;
                let diag = op.diagonal().to_vec();
                Ok(Solver::Cg {
                    op: Box::new(move |v, o| op.apply_into(v, o)),
                    diag,
                    params: cg_params(&self.solver, self.graph.dim()),
                })
            }
        }
    }

    fn grounded_solver(&self, exact_traces: bool) -> Result<Solver<'_>> {
        match &self.reduced {
            Some(sys) => Ok(Solver::Direct(sys.factor_grounded(exact_traces)?)),
            None => Ok(Solver::Cg {
                op: Box::new(move |v, o| self.graph.laplacian_apply_into(v, o)),
                diag: self.graph.degrees(),
                params: cg_params(&self.solver, self.graph.dim()),
            }),
        }
    }

    /// `w = (0, 1_c / c)`.
    fn w_vec(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.rows()];
        w.extend(std::iter::repeat_n(1.0 / self.cols() as f64, self.cols()));
        w
    }

    /// `tr[A R' W R]` for the inverse `A` applied by `solver`.
    fn trace_term(&self, solver: &Solver<'_>, stats: &mut (usize, f64)) -> Result<(f64, Option<f64>)> {
        let (wa, wb) = self.block_weights();
        let (r, c) = (self.rows(), self.cols());
        match (self.backend, solver) {
            (TraceBackend::Exact, Solver::Direct(f)) => {
                let BlockTraces { aa, bb } = f.block_traces()?;
                let h = solver.solve(&self.w_vec(), stats)?;
                let wu_h = wa * h[..r].iter().sum::<f64>() - wb * h[r..].iter().sum::<f64>();
                let w_h = h[r..].iter().sum::<f64>() / c as f64;
                let uwu = wa * r as f64 + wb * c as f64;
                Ok((wa * aa + wb * bb + 2.0 * wu_h + uwu * w_h, None))
            }
            _ => {
                let probes = self
                    .probes
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("no probe set for stochastic traces".into()))?;
                let (sa, sb) = (wa.sqrt(), wb.sqrt());
                let map = |z: &[f64]| {
                    let mut m: Vec<f64> = z[..r].iter().map(|v| sa * v).chain(z[r..].iter().map(|v| sb * v)).collect();
                    rotate_transpose(&mut m, r);
                    m
                };
                let mut inner = (0usize, 0.0f64);
                let mut inv = |b: &[f64]| solver.solve(b, &mut inner);
                let samples = hutchinson_samples(&mut inv, map, probes.probes())?;
                stats.0 += inner.0;
                stats.1 = stats.1.max(inner.1);
                let est = TraceEstimate::from_samples(&samples);
                Ok((est.mean, Some(est.std_err)))
            }
        }
    }

    /// Solves at one prior scale. Precisions may be zero on one side.
    pub fn solve_point(&self, scale: PriorScale, needs: Needs) -> Result<PointSolve> {
        scale.validate()?;
        let exact_traces = needs.trace && self.backend == TraceBackend::Exact && self.reduced.is_some();
        let solver = self.solver_at(scale, exact_traces)?;
        let mut stats = (0usize, 0.0f64);
        let r = self.rows();
        let a = solver.solve(&self.bty, &mut stats)?;
        let mut ra = a.clone();
        rotate(&mut ra, r);
        let s_ls: Vec<f64> = self.theta_ls.iter().zip(&ra).map(|(t, x)| t - x).collect();
        let mut g_z = Vec::with_capacity(self.z.len());
        let mut s_z = Vec::with_capacity(self.z.len());
        for (z, lz) in self.z.iter().zip(&self.lz) {
            let g = solver.solve(lz, &mut stats)?;
            let mut s: Vec<f64> = z.iter().zip(&g).map(|(p, q)| p - q).collect();
            rotate(&mut s, r);
            g_z.push(g);
            s_z.push(s);
        }
        let (trace, trace_std_err) = if needs.trace {
            let (t, se) = self.trace_term(&solver, &mut stats)?;
            (Some(t), se)
        } else {
            (None, None)
        };
        let (logdet_g, logdet_prior) = if needs.logdet {
            let f = match &solver {
                Solver::Direct(f) => f,
                Solver::Cg { .. } => {
                    return Err(Error::ExactTraceUnavailable(
                        "log-determinants need the sparse factor, which exceeds max_fill".into(),
                    ))
                }
            };
            (Some(f.logdet()), Some(self.logdet_prior(scale)?))
        } else {
            (None, None)
        };
        if a.iter().chain(s_ls.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("posterior solve"));
        }
        Ok(PointSolve {
            scale,
            a,
            ra,
            s_ls,
            g_z,
            s_z,
            trace,
            trace_std_err,
            logdet_g,
            logdet_prior,
            iterations: stats.0,
            residual: stats.1,
        })
    }

    /// `log det Λ*`, caching the correlation factor per `phi`.
    pub fn logdet_prior(&self, scale: PriorScale) -> Result<f64> {
        let sys = self
            .reduced
            .as_ref()
            .ok_or_else(|| Error::ExactTraceUnavailable("log-determinants need the sparse factor".into()))?;
        if !(scale.lambda_a > 0.0 && scale.lambda_b > 0.0) {
            return Err(Error::InvalidHyperparams("log det of the prior precision needs positive precisions".into()));
        }
        let key = scale.phi.to_bits();
        let cached = self.logdet_corr.lock().expect("cache lock").get(&key).copied();
        let corr = match cached {
            Some(v) => v,
            None => {
                let v = sys.logdet_correlation(scale.phi)?;
                self.logdet_corr.lock().expect("cache lock").insert(key, v);
                v
            }
        };
        Ok(self.rows() as f64 * scale.lambda_a.ln() + self.cols() as f64 * scale.lambda_b.ln() + corr)
    }

    /// Risk of the LS estimate, `sigma^2 tr[W R L^+ R']`. Computed once; `None` if
    /// the solve failed.
    pub fn ls_risk(&self) -> Option<f64> {
        *self.ls_risk.get_or_init(|| {
            let exact = self.backend == TraceBackend::Exact && self.reduced.is_some();
            let run = || -> Result<f64> {
                let solver = self.grounded_solver(exact)?;
                let mut stats = (0, 0.0);
                Ok(self.sigma2 * self.trace_term(&solver, &mut stats)?.0)
            };
            match run() {
                Ok(v) => Some(v),
                Err(e) => {
                    log::warn!("LS risk unavailable: {e}");
                    None
                }
            }
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
