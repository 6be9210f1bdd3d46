use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::oneway::mu_j;
use crate::graph::bipartite::BipartiteGraph;

/// Match-weighted moments over observations `(i, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub var_alpha: f64,
    pub var_beta: f64,
    /// `None` when either variance is zero.
    pub cor: Option<f64>,
}

/// Variances of `alpha_i` and `beta_{j(i,t)}` and their correlation over the
/// observation rows.
pub fn empirical_moments(alpha: &[f64], beta: &[f64], graph: &BipartiteGraph) -> Result<Moments> {
    if alpha.len() != graph.rows() {
        return Err(Error::DimensionMismatch { expected: graph.rows(), got: alpha.len() });
    }
    if beta.len() != graph.cols() {
        return Err(Error::DimensionMismatch { expected: graph.cols(), got: beta.len() });
    }
    let n = graph.n_obs() as f64;
    let pairs = graph.obs_rows().iter().zip(graph.obs_cols()).map(|(&i, &j)| (alpha[i], beta[j]));
    let (sa, sb) = pairs.clone().fold((0.0, 0.0), |(x, y), (a, b)| (x + a, y + b));
    let (ma, mb) = (sa / n, sb / n);
    let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
    for (a, b) in pairs {
        vaa += (a - ma) * (a - ma);
        vbb += (b - mb) * (b - mb);
        vab += (a - ma) * (b - mb);
    }
    let (var_alpha, var_beta) = (vaa / n, vbb / n);
    let cor = if vaa > 0.0 && vbb > 0.0 { Some((vab / (vaa * vbb).sqrt()).clamp(-1.0, 1.0)) } else { None };
    Ok(Moments { var_alpha, var_beta, cor })
}

fn quintiles(v: &[f64]) -> Vec<usize> {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let mut q = vec![0; n];
    for (rank, &i) in idx.iter().enumerate() {
        q[i] = rank * 5 / n;
    }
    q
}

/// Counts of units by quintile of `first` (rows) and of `second` (columns).
/// Quintile 0 holds the lowest values.
pub fn quintile_crosstab(first: &[f64], second: &[f64]) -> Result<[[usize; 5]; 5]> {
    if first.len() != second.len() {
        return Err(Error::DimensionMismatch { expected: first.len(), got: second.len() });
    }
    if first.len() < 5 {
        return Err(Error::InvalidInput(format!("need at least 5 units, got {}", first.len())));
    }
    if first.iter().chain(second).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("crosstab input"));
    }
    let (qa, qb) = (quintiles(first), quintiles(second));
    let mut out = [[0usize; 5]; 5];
    for (a, b) in qa.into_iter().zip(qb) {
        out[a][b] += 1;
    }
    Ok(out)
}

/// One column unit's effect and the average row effect of its matches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub col: usize,
    pub beta: f64,
    pub mu: f64,
}

/// `(beta_j, mu_j)` pairs for an effect vector `(alpha, beta)`.
pub fn scatter_points(theta: &[f64], graph: &BipartiteGraph) -> Result<Vec<ScatterPoint>> {
    if theta.len() != graph.dim() {
        return Err(Error::DimensionMismatch { expected: graph.dim(), got: theta.len() });
    }
    let mu = mu_j(&theta[..graph.rows()], graph)?;
    Ok(theta[graph.rows()..]
        .iter()
        .zip(mu)
        .enumerate()
        .map(|(col, (&beta, mu))| ScatterPoint { col, beta, mu })
        .collect())
}

/// Quantiles by linear interpolation between order statistics. NaNs are ignored.
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let h = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if v[lo] == v[hi] {
        return Some(v[lo]);
    }
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_graph, random_vec};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_effects_have_no_correlation() {
        let g = random_graph(10, 4, 2, 1);
        let m = empirical_moments(&[1.0; 10], &[2.0; 4], &g).unwrap();
        assert_eq!((m.var_alpha, m.var_beta, m.cor), (0.0, 0.0, None));
    }

    #[test]
    fn moments_match_observation_level_formula() {
        let g = random_graph(30, 6, 3, 2);
        let a = random_vec(30, 3);
        let b = random_vec(6, 4);
        let m = empirical_moments(&a, &b, &g).unwrap();
        let xa: Vec<f64> = g.obs_rows().iter().map(|&i| a[i]).collect();
        let xb: Vec<f64> = g.obs_cols().iter().map(|&j| b[j]).collect();
        let n = xa.len() as f64;
        let mean = |x: &[f64]| x.iter().sum::<f64>() / n;
        let (ma, mb) = (mean(&xa), mean(&xb));
        let cov = xa.iter().zip(&xb).map(|(p, q)| (p - ma) * (q - mb)).sum::<f64>() / n;
        let va = xa.iter().map(|p| (p - ma).powi(2)).sum::<f64>() / n;
        let vb = xb.iter().map(|q| (q - mb).powi(2)).sum::<f64>() / n;
        assert!((m.var_alpha - va).abs() < 1e-14);
        assert!((m.var_beta - vb).abs() < 1e-14);
        assert!((m.cor.unwrap() - cov / (va * vb).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn crosstab_diagonal_and_antidiagonal() {
        let v = random_vec(103, 5);
        let t = quintile_crosstab(&v, &v).unwrap();
        for (a, row) in t.iter().enumerate() {
            for (b, &n) in row.iter().enumerate() {
                if a != b {
                    assert_eq!(n, 0);
                } else {
                    assert!((20..=21).contains(&n));
                }
            }
        }
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        let t = quintile_crosstab(&v, &neg).unwrap();
        assert!((0..5).all(|a| t[a][4 - a] > 0));
        assert_eq!(t.iter().flatten().sum::<usize>(), 103);
        assert!(quintile_crosstab(&v, &v[1..]).is_err());
        assert!(quintile_crosstab(&v[..4], &v[..4]).is_err());
    }

    #[test]
    fn crosstab_of_independent_vectors_is_flat() {
        let a = random_vec(5000, 6);
        let mut b = a.clone();
        b.shuffle(&mut ChaCha8Rng::seed_from_u64(7));
        let t = quintile_crosstab(&a, &b).unwrap();
        let bound = 4.0 * 200f64.sqrt();
        for &n in t.iter().flatten() {
            assert!((n as f64 - 200.0).abs() < bound);
        }
        for k in 0..5 {
            assert_eq!(t[k].iter().sum::<usize>(), 1000);
            assert_eq!(t.iter().map(|row| row[k]).sum::<usize>(), 1000);
        }
    }

    #[test]
    fn quantiles() {
        let v = [3.0, 1.0, 2.0, f64::NAN, 4.0];
        assert_eq!(median(&v), Some(2.5));
        assert_eq!(quantile(&v, 0.0), Some(1.0));
        assert_eq!(quantile(&v, 1.0), Some(4.0));
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[f64::INFINITY; 3]), Some(f64::INFINITY));
    }

    #[test]
    fn scatter_matches_definition() {
        let g = random_graph(12, 3, 2, 8);
        let th = random_vec(15, 9);
        let pts = scatter_points(&th, &g).unwrap();
        for p in &pts {
            let (mut s, mut d) = (0.0, 0.0);
            for (&i, &j) in g.obs_rows().iter().zip(g.obs_cols()) {
                if j == p.col {
                    s += th[i];
                    d += 1.0;
                }
            }
            assert!((p.mu - s / d).abs() < 1e-14);
            assert_eq!(p.beta, th[12 + p.col]);
        }
    }
}
