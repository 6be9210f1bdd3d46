use crate::error::{Error, Result};
use crate::estimators::result::{EstimateResult, SolverDiagnostics};
use crate::graph::bipartite::BipartiteGraph;
use crate::graph::components::connected_components;
use crate::sparse_linalg::cg::{cg_solve, CgParams};
use crate::sparse_linalg::config::SolverConfig;

/// Applies `R = I + u w'`: shifts the column-block mean onto the row block.
pub fn rotate(theta: &mut [f64], rows: usize) {
    let cols = theta.len() - rows;
    if cols == 0 {
        return;
    }
    let m = theta[rows..].iter().sum::<f64>() / cols as f64;
    theta[..rows].iter_mut().for_each(|a| *a += m);
    theta[rows..].iter_mut().for_each(|b| *b -= m);
}

/// Applies `R' = I + w u'`.
pub fn rotate_transpose(x: &mut [f64], rows: usize) {
    let cols = x.len() - rows;
    if cols == 0 {
        return;
    }
    let s = x[..rows].iter().sum::<f64>() - x[rows..].iter().sum::<f64>();
    let t = s / cols as f64;
    x[rows..].iter_mut().for_each(|b| *b += t);
}

pub(crate) fn require_connected(graph: &BipartiteGraph) -> Result<()> {
    let comps = connected_components(graph);
    if comps.count() > 1 {
        return Err(Error::Disconnected { components: comps.count() });
    }
    Ok(())
}

pub(crate) fn cg_params(config: &SolverConfig, dim: usize) -> CgParams {
    CgParams { rel_tol: config.rel_tol, abs_tol: config.abs_tol, max_iter: config.max_iter_for(dim) }
}

/// Solves `L x = b` for `b` orthogonal to `(1_r, -1_c)` by preconditioned CG and
/// returns `R x`.
pub(crate) fn laplacian_solve_rotated(
    graph: &BipartiteGraph,
    b: &[f64],
    config: &SolverConfig,
) -> Result<(Vec<f64>, usize, f64)> {
    let diag = graph.degrees();
    let out = cg_solve(
        |v, o| graph.laplacian_apply_into(v, o),
        Some(&diag),
        b,
        cg_params(config, graph.dim()),
    )?;
    let mut x = out.x;
    rotate(&mut x, graph.rows());
    Ok((x, out.iterations, out.residual))
}

/// Restricted least squares estimate with `sum(beta) = 0`.
pub fn ls_estimate(graph: &BipartiteGraph, y: &[f64], config: &SolverConfig) -> Result<EstimateResult> {
    require_connected(graph)?;
    let bty = graph.bt_apply(y)?;
    let (theta, it, res) = laplacian_solve_rotated(graph, &bty, config)?;
    Ok(EstimateResult::from_theta(&theta, graph.rows(), SolverDiagnostics::new("cg", it, res)))
}

/// `||Y - B theta_ls||^2 / (n - (r + c - 1))`.
pub fn sigma2_from_fit(graph: &BipartiteGraph, y: &[f64], theta_ls: &[f64]) -> Result<f64> {
    let n = graph.n_obs();
    let params = graph.dim() - 1;
    if n <= params {
        return Err(Error::DegreesOfFreedom { n, params });
    }
    let fit = graph.b_apply(theta_ls)?;
    if fit.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: fit.len(), got: y.len() });
    }
    let ssr: f64 = y.iter().zip(&fit).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(ssr / (n - params) as f64)
}

/// Least squares residual variance.
pub fn sigma2_estimate(graph: &BipartiteGraph, y: &[f64], config: &SolverConfig) -> Result<f64> {
    let n = graph.n_obs();
    if n < graph.dim() {
        return Err(Error::DegreesOfFreedom { n, params: graph.dim() - 1 });
    }
    let ls = ls_estimate(graph, y, config)?;
    sigma2_from_fit(graph, y, &ls.theta())
}
