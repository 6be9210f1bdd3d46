use crate::error::{Error, Result};
use crate::estimators::hyperparams::{Hyperparams, Precision};
use crate::graph::bipartite::BipartiteGraph;
use crate::graph::projection::projected_laplacian;
use crate::sparse_linalg::ldl::SparseLdl;

fn demean(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

fn column_sums(graph: &BipartiteGraph, y: &[f64]) -> Result<Vec<f64>> {
    let bty = graph.bt_apply(y)?;
    Ok(bty[graph.rows()..].to_vec())
}

/// Column effects ignoring row effects: `M_c (D_b + λ_b)^{-1} B2'Y`.
pub fn one_way_shrink(graph: &BipartiteGraph, y: &[f64], lambda_b: Precision) -> Result<Vec<f64>> {
    let sums = column_sums(graph, y)?;
    let Some(lb) = lambda_b.as_finite() else {
        return Ok(vec![0.0; graph.cols()]);
    };
    let mut beta: Vec<f64> = sums.iter().zip(graph.col_degrees()).map(|(s, d)| s / (d + lb)).collect();
    demean(&mut beta);
    Ok(beta)
}

/// Column effects shrunk after partialling out row effects:
/// `M_c L_{2,⊥} (L_{2,⊥} + λ_b I)^{-1} β_ls`.
pub fn projected_one_way_shrink(graph: &BipartiteGraph, beta_ls: &[f64], lambda_b: Precision) -> Result<Vec<f64>> {
    let c = graph.cols();
    let beta_ls = if beta_ls.len() == graph.dim() { &beta_ls[graph.rows()..] } else { beta_ls };
    if beta_ls.len() != c {
        return Err(Error::DimensionMismatch { expected: c, got: beta_ls.len() });
    }
    let mut out = match lambda_b {
        Precision::Infinite => return Ok(vec![0.0; c]),
        Precision::Zero => beta_ls.to_vec(),
        Precision::Finite(lb) => {
            let f = SparseLdl::new(&projected_laplacian(graph).shifted(lb))?;
            let x = f.solve(beta_ls);
            beta_ls.iter().zip(&x).map(|(b, xi)| b - lb * xi).collect()
        }
    };
    demean(&mut out);
    Ok(out)
}

/// Per-column outcome means.
pub fn column_means(graph: &BipartiteGraph, y: &[f64]) -> Result<Vec<f64>> {
    Ok(column_sums(graph, y)?.iter().zip(graph.col_degrees()).map(|(s, d)| s / d).collect())
}

/// Residual variance of the one-way model `y = beta_j + e`: `sum (y - mean_j)^2 / (n - c)`.
pub fn one_way_sigma2(graph: &BipartiteGraph, y: &[f64]) -> Result<f64> {
    let means = column_means(graph, y)?;
    let n = graph.n_obs();
    if n <= graph.cols() {
        return Err(Error::DegreesOfFreedom { n, params: graph.cols() });
    }
    let ssr: f64 = y.iter().zip(graph.obs_cols()).map(|(v, &j)| (v - means[j]).powi(2)).sum();
    Ok(ssr / (n - graph.cols()) as f64)
}

/// Method-of-moments precision `σ² / σ_β²`, with
/// `σ_β² = var(column means) - σ² / mean(column degree)`.
pub fn moment_lambda_b(graph: &BipartiteGraph, y: &[f64], sigma2: f64) -> Result<f64> {
    let c = graph.cols();
    if c < 2 {
        return Err(Error::InvalidInput("at least two column units are needed".into()));
    }
    if sigma2 == 0.0 {
        return Ok(0.0);
    }
    let means = column_means(graph, y)?;
    let m = means.iter().sum::<f64>() / c as f64;
    let var = means.iter().map(|b| (b - m).powi(2)).sum::<f64>() / (c - 1) as f64;
    let dbar = graph.col_degrees().iter().sum::<f64>() / c as f64;
    let signal = var - sigma2 / dbar;
    if !(signal > 0.0) {
        return Err(Error::NonPositiveSignalVariance(signal));
    }
    Ok(sigma2 / signal)
}

/// Column effects shrunk with the moment precision and row effects from the
/// remaining row means. `sigma2 = None` uses the one-way residual variance.
pub fn one_way_fit(graph: &BipartiteGraph, y: &[f64], sigma2: Option<f64>) -> Result<(Vec<f64>, Hyperparams)> {
    let s2 = match sigma2 {
        Some(v) => v,
        None => one_way_sigma2(graph, y)?,
    };
    let lb = match moment_lambda_b(graph, y, s2) {
        Ok(0.0) => Precision::Zero,
        Ok(v) => Precision::Finite(v),
        Err(Error::NonPositiveSignalVariance(_)) => Precision::Infinite,
        Err(e) => return Err(e),
    };
    let beta = one_way_shrink(graph, y, lb)?;
    let mut sums = vec![0.0; graph.rows()];
    for ((&i, &j), v) in graph.obs_rows().iter().zip(graph.obs_cols()).zip(y) {
        sums[i] += v - beta[j];
    }
    let mut theta: Vec<f64> = sums.iter().zip(graph.row_degrees()).map(|(s, d)| s / d).collect();
    theta.extend(beta);
    Ok((theta, Hyperparams { mu: 0.0, lambda_a: Precision::Infinite, lambda_b: lb, phi: 0.0 }))
}

/// Average row effect matched to each column unit, weighted by match counts.
pub fn mu_j(alpha: &[f64], graph: &BipartiteGraph) -> Result<Vec<f64>> {
    let alpha = if alpha.len() == graph.dim() { &alpha[..graph.rows()] } else { alpha };
    if alpha.len() != graph.rows() {
        return Err(Error::DimensionMismatch { expected: graph.rows(), got: alpha.len() });
    }
    let mut acc = vec![0.0; graph.cols()];
    for e in graph.edges() {
        acc[e.col] += e.mult * alpha[e.row];
    }
    Ok(acc.iter().zip(graph.col_degrees()).map(|(s, d)| s / d).collect())
}
