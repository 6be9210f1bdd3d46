use nalgebra::{DMatrix, DVector};

/// `f(delta) = q0 - 2 delta'b + delta'A delta` over the location coefficients.
#[derive(Debug, Clone)]
pub struct LocationQuadratic {
    pub q0: f64,
    pub b: DVector<f64>,
    pub a: DMatrix<f64>,
    /// Per-coordinate reference scale for detecting a vanishing curvature.
    pub reference: Vec<f64>,
}

/// Minimizer of a [`LocationQuadratic`].
#[derive(Debug, Clone, PartialEq)]
pub struct Minimizer {
    pub delta: Vec<f64>,
    /// Set when the system was singular and a fallback was used.
    pub degenerate: bool,
}

const RIDGE: f64 = 1e-10;

impl LocationQuadratic {
    pub fn eval(&self, delta: &[f64]) -> f64 {
        let d = DVector::from_column_slice(delta);
        self.q0 - 2.0 * d.dot(&self.b) + d.dot(&(&self.a * &d))
    }

    fn vanishing(&self, k: usize) -> bool {
        !(self.a[(k, k)] > 1e-14 * self.reference[k].abs())
    }

    /// Solves `A delta = b`. A single coordinate with vanishing curvature falls back to
    /// 0; a singular multi-coordinate system is ridge-regularized.
    pub fn minimize(&self) -> Minimizer {
        let k = self.b.len();
        if k == 0 {
            return Minimizer { delta: vec![], degenerate: false };
        }
        if k == 1 {
            if self.vanishing(0) {
                return Minimizer { delta: vec![0.0], degenerate: true };
            }
            return Minimizer { delta: vec![self.b[0] / self.a[(0, 0)]], degenerate: false };
        }
        let singular = (0..k).any(|i| self.vanishing(i));
        if !singular {
            if let Some(ch) = self.a.clone().cholesky() {
                let piv_ok = (0..k).all(|i| ch.l_dirty()[(i, i)].powi(2) > 1e-12 * self.a[(i, i)]);
                if piv_ok {
                    return Minimizer { delta: ch.solve(&self.b).iter().copied().collect(), degenerate: false };
                }
            }
        }
        let ridged = &self.a + DMatrix::identity(k, k) * RIDGE;
        let delta = match ridged.cholesky() {
            Some(ch) => ch.solve(&self.b).iter().copied().collect(),
            None => vec![0.0; k],
        };
        Minimizer { delta, degenerate: true }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_of_scalar_quadratic() {
        let q = LocationQuadratic {
            q0: 5.0,
            b: DVector::from_vec(vec![3.0]),
            a: DMatrix::from_element(1, 1, 2.0),
            reference: vec![1.0],
        };
        let m = q.minimize();
        assert_eq!(m.delta, vec![1.5]);
        assert!(q.eval(&m.delta) <= q.eval(&[1.4]) && q.eval(&m.delta) <= q.eval(&[1.6]));
    }

    #[test]
    fn degenerate_paths() {
        let q = LocationQuadratic {
            q0: 0.0,
            b: DVector::from_vec(vec![1e-20]),
            a: DMatrix::from_element(1, 1, 1e-30),
            reference: vec![1.0],
        };
        assert_eq!(q.minimize(), Minimizer { delta: vec![0.0], degenerate: true });
        let q = LocationQuadratic {
            q0: 0.0,
            b: DVector::zeros(2),
            a: DMatrix::zeros(2, 2),
            reference: vec![1.0, 1.0],
        };
        let m = q.minimize();
        assert!(m.degenerate);
        assert_eq!(m.delta, vec![0.0, 0.0]);
    }
}
