//! Smallest nonzero eigenvalues of symmetric positive semidefinite operators with a
//! known kernel, by Lanczos iteration with full reorthogonalization.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse_linalg::ldl::SparseLdl;
use crate::sparse_linalg::sparse::SymSparse;

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Relative residual tolerance: `||A v - ρ v|| <= tol ||v||`.
    pub tol: f64,
    pub max_iter: usize,
    /// Dense eigendecomposition is used up to this dimension.
    pub dense_threshold: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tol: 1e-8, max_iter: 5000, dense_threshold: 500, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    /// Nondecreasing eigenvalues.
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub method: &'static str,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn orthonormalize(basis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in basis {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = dot(q, &w);
                axpy(&mut w, -c, q);
            }
        }
        let nrm = dot(&w, &w).sqrt();
        if nrm > 1e-12 * dot(v, v).sqrt().max(1e-300) {
            w.iter_mut().for_each(|x| *x /= nrm);
            out.push(w);
        }
    }
    out
}

fn project_out(w: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let c = dot(q, w);
        axpy(w, -c, q);
    }
}

fn residual<F: Fn(&[f64], &mut [f64])>(apply: &F, v: &[f64], rho: f64) -> f64 {
    let mut av = vec![0.0; v.len()];
    apply(v, &mut av);
    axpy(&mut av, -rho, v);
    dot(&av, &av).sqrt() / dot(v, v).sqrt()
}

/// Lanczos for the largest eigenvalues of `op` on the complement of `null`.
/// `to_rho` maps a Ritz value of `op` to an eigenvalue of the original operator.
#[allow(clippy::too_many_arguments)]
fn lanczos<O, A, T>(
    n: usize,
    mut op: O,
    apply: &A,
    to_rho: T,
    null: &[Vec<f64>],
    k: usize,
    opts: &EigenOptions,
    method: &'static str,
) -> Result<EigenResult>
where
    O: FnMut(&[f64]) -> Result<Vec<f64>>,
    A: Fn(&[f64], &mut [f64]),
    T: Fn(f64) -> f64,
{
    let max_dim = (n - null.len()).min(opts.max_iter);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut random_start = |basis: &[Vec<f64>]| -> Option<Vec<f64>> {
        for _ in 0..5 {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            for _ in 0..2 {
                project_out(&mut v, null);
                project_out(&mut v, basis);
            }
            let nrm = dot(&v, &v).sqrt();
            if nrm > 1e-8 {
                v.iter_mut().for_each(|x| *x /= nrm);
                return Some(v);
            }
        }
        None
    };
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut v = random_start(&basis).ok_or(Error::NonFinite("lanczos start vector"))?;
    let mut best = f64::INFINITY;
    loop {
        let mut w = op(&v)?;
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("lanczos operator"));
        }
        project_out(&mut w, null);
        let a = dot(&v, &w);
        basis.push(v);
        alpha.push(a);
        for _ in 0..2 {
            project_out(&mut w, null);
            project_out(&mut w, &basis);
        }
        let b = dot(&w, &w).sqrt();
        let m = basis.len();
        let scale = alpha.iter().fold(0.0f64, |s, x| s.max(x.abs())).max(1e-300);
        let exhausted = m >= max_dim;
        let breakdown = b <= 1e-10 * scale;
        if m >= k && (m.is_multiple_of(5) || exhausted || breakdown) {
            let mut t = DMatrix::zeros(m, m);
            for i in 0..m {
                t[(i, i)] = alpha[i];
                if i + 1 < m {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let mut idx: Vec<usize> = (0..m).collect();
            idx.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
            let mut values = Vec::with_capacity(k);
            let mut residuals = Vec::with_capacity(k);
            for &i in idx.iter().take(k) {
                let rho = to_rho(eig.eigenvalues[i]);
                let mut y = vec![0.0; n];
                for (j, q) in basis.iter().enumerate() {
                    axpy(&mut y, eig.eigenvectors[(j, i)], q);
                }
                residuals.push(residual(apply, &y, rho));
                values.push(rho);
            }
            let worst = residuals.iter().fold(0.0f64, |s, &x| s.max(x));
            best = best.min(worst);
            if worst <= opts.tol {
                let mut pairs: Vec<(f64, f64)> = values.into_iter().zip(residuals).collect();
                pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
                return Ok(EigenResult {
                    values: pairs.iter().map(|p| p.0).collect(),
                    residuals: pairs.iter().map(|p| p.1).collect(),
                    method,
                });
            }
        }
        if exhausted {
            return Err(Error::NotConverged { iterations: m, residual: best });
        }
        if breakdown {
            beta.push(0.0);
            v = match random_start(&basis) {
                Some(v) => v,
                None => return Err(Error::NotConverged { iterations: m, residual: best }),
            };
        } else {
            beta.push(b);
            w.iter_mut().for_each(|x| *x /= b);
            v = w;
        }
    }
}

fn dense_eigs<A: Fn(&[f64], &mut [f64])>(
    n: usize,
    apply: &A,
    null: &[Vec<f64>],
    k: usize,
) -> EigenResult {
    let mut a = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        apply(&e, &mut col);
        e[j] = 0.0;
        for i in 0..n {
            a[(i, j)] = col[i];
        }
    }
    let a = (&a + a.transpose()) * 0.5;
    let bound = (0..n).map(|i| a.row(i).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut shifted = a.clone();
    for q in null {
        let qv = nalgebra::DVector::from_column_slice(q);
        shifted += (&qv * qv.transpose()) * (2.0 * bound + 1.0);
    }
    let eig = SymmetricEigen::new(shifted);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let mut values = Vec::new();
    let mut residuals = Vec::new();
    for &i in idx.iter().take(k) {
        let v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let rho = eig.eigenvalues[i];
        values.push(rho);
        residuals.push(residual(apply, &v, rho));
    }
    EigenResult { values, residuals, method: "dense" }
}

/// Matrix-free: `k` smallest eigenvalues of a PSD operator on the orthogonal
/// complement of `null_basis`, without shift-invert.
pub fn smallest_nonzero_eigs<A: Fn(&[f64], &mut [f64])>(
    apply: A,
    n: usize,
    null_basis: &[Vec<f64>],
    k: usize,
    bound: f64,
    opts: &EigenOptions,
) -> Result<EigenResult> {
    let null = orthonormalize(null_basis);
    let k = k.min(n.saturating_sub(null.len()));
    if k == 0 {
        return Ok(EigenResult { values: vec![], residuals: vec![], method: "empty" });
    }
    if n <= opts.dense_threshold {
        return Ok(dense_eigs(n, &apply, &null, k));
    }
    let op = |v: &[f64]| -> Result<Vec<f64>> {
        let mut av = vec![0.0; n];
        apply(v, &mut av);
        Ok(v.iter().zip(&av).map(|(x, y)| bound * x - y).collect())
    };
    lanczos(n, op, &apply, |t| bound - t, &null, k, opts, "lanczos")
}

/// Sparse matrix variant: dense for small sizes, shift-invert Lanczos otherwise,
/// falling back to the shift-free iteration if the shifted factorization fails.
pub fn smallest_nonzero_eigs_sparse(
    a: &SymSparse,
    null_basis: &[Vec<f64>],
    k: usize,
    opts: &EigenOptions,
) -> Result<EigenResult> {
    let n = a.dim();
    let apply = |x: &[f64], y: &mut [f64]| a.apply_into(x, y);
    let bound = a.max_abs_row_sum();
    if n <= opts.dense_threshold {
        return smallest_nonzero_eigs(apply, n, null_basis, k, bound, opts);
    }
    let null = orthonormalize(null_basis);
    let k = k.min(n.saturating_sub(null.len()));
    if k == 0 {
        return Ok(EigenResult { values: vec![], residuals: vec![], method: "empty" });
    }
    let max_diag = a.diag().iter().fold(0.0f64, |m, d| m.max(*d));
    let sigma = 1e-6 * max_diag.max(1e-300);
    match SparseLdl::new(&a.shifted(sigma)) {
        Ok(f) => {
            let op = |v: &[f64]| Ok(f.solve(v));
            lanczos(n, op, &apply, |t| 1.0 / t - sigma, &null, k, opts, "shift-invert lanczos")
        }
        Err(_) => smallest_nonzero_eigs(apply, n, null_basis, k, bound, opts),
    }
}
