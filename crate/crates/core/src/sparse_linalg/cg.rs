//! Jacobi-preconditioned conjugate gradients for symmetric positive (semi)definite operators.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct CgParams {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// True residual norm `||A x - b||` at exit.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` with `A` given by `op(x, out)`. `precond` is the diagonal of A
/// (Jacobi); `None` means no preconditioning. Consistent singular systems are fine
/// as long as `b` lies in the range of A.
///
/// On success the true residual satisfies `||A x - b|| <= rel_tol ||b|| + abs_tol`.
pub fn cg_solve<F>(op: F, precond: Option<&[f64]>, b: &[f64], params: CgParams) -> Result<CgOutcome>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("conjugate gradient right-hand side"));
    }
    let target = params.rel_tol * norm(b) + params.abs_tol;
    let inv_diag: Vec<f64> = match precond {
        Some(d) => d.iter().map(|&v| if v > 0.0 { 1.0 / v } else { 1.0 }).collect(),
        None => vec![1.0; n],
    };
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut ax = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let mut res = norm(&r);
    if res <= target {
        return Ok(CgOutcome { x, iterations, residual: res });
    }
    // outer loop restarts from the true residual when the recurrence drifts
    loop {
        for i in 0..n {
            z[i] = inv_diag[i] * r[i];
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        while iterations < params.max_iter {
            op(&p, &mut ap);
            iterations += 1;
            let pap = dot(&p, &ap);
            if !pap.is_finite() || !rz.is_finite() {
                return Err(Error::NonFinite("conjugate gradient iteration"));
            }
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if norm(&r) <= target {
                break;
            }
            for i in 0..n {
                z[i] = inv_diag[i] * r[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        op(&x, &mut ax);
        for i in 0..n {
            r[i] = b[i] - ax[i];
        }
        res = norm(&r);
        if !res.is_finite() {
            return Err(Error::NonFinite("conjugate gradient residual"));
        }
        if res <= target {
            return Ok(CgOutcome { x, iterations, residual: res });
        }
        if iterations >= params.max_iter {
            return Err(Error::NotConverged { iterations, residual: res });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};

    const P: CgParams = CgParams { rel_tol: 1e-12, abs_tol: 1e-300, max_iter: 1000 };

    #[test]
    fn identity_converges_in_one_iteration() {
        let b = vec![1.0, -2.0, 3.5];
        let out = cg_solve(|x, y| y.copy_from_slice(x), None, &b, P).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.x, b);
    }

    #[test]
    fn random_spd_matches_dense_solve() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let m = DMatrix::from_fn(20, 20, |_, _| rng.random_range(-1.0..1.0));
        let a = &m * m.transpose() + DMatrix::identity(20, 20) * 0.5;
        let b: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let diag: Vec<f64> = a.diagonal().iter().copied().collect();
        let op = |x: &[f64], y: &mut [f64]| {
            let v = &a * DVector::from_column_slice(x);
            y.copy_from_slice(v.as_slice());
        };
        let out = cg_solve(op, Some(&diag), &b, P).unwrap();
        let xd = a.clone().lu().solve(&DVector::from_column_slice(&b)).unwrap();
        let err = (DVector::from_column_slice(&out.x) - &xd).norm() / xd.norm();
        assert!(err <= 1e-8);
    }

    #[test]
    fn non_convergence_reports_residual() {
        let a = DMatrix::from_diagonal(&DVector::from_vec((1..=50).map(|k| k as f64).collect()));
        let b = vec![1.0; 50];
        let op = |x: &[f64], y: &mut [f64]| {
            let v = &a * DVector::from_column_slice(x);
            y.copy_from_slice(v.as_slice());
        };
        let err = cg_solve(op, None, &b, CgParams { max_iter: 3, ..P }).unwrap_err();
        assert!(matches!(err, Error::NotConverged { iterations: 3, .. }));
    }

    #[test]
    fn nan_is_rejected() {
        let err = cg_solve(|x, y| y.copy_from_slice(x), None, &[f64::NAN], P).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        let err = cg_solve(|_, y| y.fill(f64::NAN), None, &[1.0], P).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }
}
