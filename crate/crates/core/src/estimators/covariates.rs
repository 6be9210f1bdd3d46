use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::ls::ls_estimate;
use crate::graph::bipartite::build_graph;
use crate::graph::panel::MatchedPanel;
use crate::sparse_linalg::config::SolverConfig;

/// How the slope on observation-level covariates is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum CovariateMode {
    /// Two-way fixed-effects OLS (strictly exogenous covariates).
    StrictOls,
    /// A slope estimated elsewhere, e.g. for lagged outcomes.
    ExternalGamma(Vec<f64>),
}

/// Returns `Y* - X gamma` and `gamma`.
pub fn partial_out_covariates(
    panel: &MatchedPanel,
    mode: &CovariateMode,
    config: &SolverConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = panel.num_covariates();
    let y = panel.outcomes();
    let gamma = match mode {
        CovariateMode::ExternalGamma(g) => {
            if g.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: g.len() });
            }
            g.clone()
        }
        CovariateMode::StrictOls if k == 0 => Vec::new(),
        CovariateMode::StrictOls => strict_ols(panel, config)?,
    };
    let mut out = y.to_vec();
    for (j, g) in gamma.iter().enumerate() {
        for (o, x) in panel.covariate(j).iter().enumerate() {
            out[o] -= g * x;
        }
    }
    Ok((out, gamma))
}

fn fe_residual(panel: &MatchedPanel, v: &[f64], config: &SolverConfig) -> Result<Vec<f64>> {
    let graph = build_graph(panel)?;
    let theta = ls_estimate(&graph, v, config)?.theta();
    let fit = graph.b_apply(&theta)?;
    Ok(v.iter().zip(&fit).map(|(a, b)| a - b).collect())
}

fn strict_ols(panel: &MatchedPanel, config: &SolverConfig) -> Result<Vec<f64>> {
    let k = panel.num_covariates();
    let n = panel.len();
    let mut xr = DMatrix::zeros(n, k);
    let mut norms = Vec::with_capacity(k);
    for j in 0..k {
        let x = panel.covariate(j);
        norms.push(x.iter().map(|v| v * v).sum::<f64>().sqrt());
        let res = fe_residual(panel, &x, config)?;
        xr.set_column(j, &DVector::from_vec(res));
    }
    let yr = DVector::from_vec(fe_residual(panel, panel.outcomes(), config)?);
    // Gram-Schmidt pass to name collinear columns
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut bad = Vec::new();
    for j in 0..k {
        let mut q = xr.column(j).into_owned();
        for b in &basis {
            let p = b.dot(&q);
            q -= b * p;
        }
        let nq = q.norm();
        if nq <= 1e-9 * norms[j].max(1e-300) {
            bad.push(panel.covariate_names()[j].clone());
        } else {
            basis.push(q / nq);
        }
    }
    if !bad.is_empty() {
        return Err(Error::RankDeficient { columns: bad });
    }
    let xtx = xr.transpose() * &xr;
    let xty = xr.transpose() * yr;
    let chol = xtx
        .cholesky()
        .ok_or_else(|| Error::RankDeficient { columns: panel.covariate_names().to_vec() })?;
    Ok(chol.solve(&xty).iter().copied().collect())
}
