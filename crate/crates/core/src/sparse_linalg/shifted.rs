//! The shifted precision `G = L + Λ*` and its direct factorization through the
//! Schur complement onto the smaller side of the bipartite graph.
//!
//! Both diagonal blocks of G are diagonal, so eliminating the larger side is free
//! and leaves a sparse system `K = D_k + λ_k - C'E^{-1}C` whose pattern is that of
//! the one-mode projection and does not depend on the hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Side};
use crate::graph::bipartite::BipartiteGraph;
use crate::sparse_linalg::ldl::{NumericLdl, SymbolicLdl};

/// The location-free part of the hyperparameters: prior precisions and the
/// assortative-matching parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorScale {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub phi: f64,
}

impl PriorScale {
    pub fn new(lambda_a: f64, lambda_b: f64, phi: f64) -> Self {
        PriorScale { lambda_a, lambda_b, phi }
    }

    /// Accepts zero precisions (limit cases) but not negative or non-finite ones.
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.lambda_a) || !ok(self.lambda_b) {
            return Err(Error::InvalidHyperparams(format!(
                "precisions must be finite and nonnegative (lambda_a = {}, lambda_b = {})",
                self.lambda_a, self.lambda_b
            )));
        }
        if !(self.phi.abs() < 1.0) {
            return Err(Error::InvalidHyperparams(format!("|phi| must be below 1, got {}", self.phi)));
        }
        if self.lambda_a == 0.0 && self.lambda_b == 0.0 {
            return Err(Error::InvalidHyperparams("L + Λ* is singular when both precisions are zero".into()));
        }
        Ok(())
    }
}

/// Matrix-free `v -> (L + Λ*) v` with `Λ* = Λ^{1/2}(I - φ𝒜)Λ^{1/2}`.
#[derive(Debug, Clone)]
pub struct ShiftedPrecisionOperator<'g> {
    graph: &'g BipartiteGraph,
    scale: PriorScale,
    diag: Vec<f64>,
    coupling: Vec<f64>,
}

impl<'g> ShiftedPrecisionOperator<'g> {
    pub fn new(graph: &'g BipartiteGraph, scale: PriorScale) -> Result<Self> {
        scale.validate()?;
        let r = graph.rows();
        let mut diag = graph.degrees();
        diag[..r].iter_mut().for_each(|d| *d += scale.lambda_a);
        diag[r..].iter_mut().for_each(|d| *d += scale.lambda_b);
        let s = scale.phi * (scale.lambda_a * scale.lambda_b).sqrt();
        let coupling = graph.edges().iter().map(|e| e.mult - s * graph.normalized_weight(e)).collect();
        Ok(ShiftedPrecisionOperator { graph, scale, diag, coupling })
    }

    pub fn scale(&self) -> PriorScale {
        self.scale
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Diagonal of the operator (Jacobi preconditioner).
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let r = self.graph.rows();
        for k in 0..v.len() {
            out[k] = self.diag[k] * v[k];
        }
        for (e, &c) in self.graph.edges().iter().zip(&self.coupling) {
            out[e.row] += c * v[r + e.col];
            out[r + e.col] += c * v[e.row];
        }
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// `Λ* v` alone.
    pub fn prior_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        prior_precision_apply(self.graph, self.scale, v)
    }
}

/// `Λ* v` for a given scale.
pub fn prior_precision_apply(graph: &BipartiteGraph, scale: PriorScale, v: &[f64]) -> Result<Vec<f64>> {
    let av = graph.normalized_adjacency_apply(v)?;
    let r = graph.rows();
    let (la, lb) = (scale.lambda_a, scale.lambda_b);
    let s = scale.phi * (la * lb).sqrt();
    Ok((0..v.len())
        .map(|k| {
            let lam = if k < r { la } else { lb };
            lam * v[k] - s * av[k]
        })
        .collect())
}

/// Dense `Λ*` (tests and small instances).
pub fn dense_prior_precision(graph: &BipartiteGraph, scale: PriorScale) -> nalgebra::DMatrix<f64> {
    let n = graph.dim();
    let r = graph.rows();
    let mut m = nalgebra::DMatrix::zeros(n, n);
    for k in 0..n {
        m[(k, k)] = if k < r { scale.lambda_a } else { scale.lambda_b };
    }
    let s = scale.phi * (scale.lambda_a * scale.lambda_b).sqrt();
    for e in graph.edges() {
        let w = -s * graph.normalized_weight(e);
        m[(e.row, r + e.col)] += w;
        m[(r + e.col, e.row)] += w;
    }
    m
}

/// Symbolic Schur-complement structure for a graph, shared by all hyperparameters.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    rows: usize,
    cols: usize,
    kept: Side,
    /// Eliminated-side degrees.
    e_deg: Vec<f64>,
    /// Kept-side degrees, in permuted order.
    k_deg: Vec<f64>,
    e_ptr: Vec<usize>,
    /// Kept neighbour of each eliminated-side edge, in permuted order.
    e_nbr: Vec<usize>,
    e_mult: Vec<f64>,
    /// Slots of the neighbour pairs `(a, b)`, `a < b`, of each eliminated node.
    pair_ptr: Vec<usize>,
    pair_slot: Vec<usize>,
    sym: SymbolicLdl,
    /// Off-diagonal slots touching the pinned (last eliminated) node.
    pin_slots: Vec<usize>,
}

/// Blocks of `G^{-1}` needed by the risk estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockTraces {
    /// `tr` of the row-unit block.
    pub aa: f64,
    /// `tr` of the column-unit block.
    pub bb: f64,
}

impl ReducedSystem {
    /// Symbolic analysis. Returns `None` if the factor exceeds `max_fill` entries.
    pub fn new(graph: &BipartiteGraph, max_fill: usize) -> Option<Self> {
        let kept = if graph.cols() <= graph.rows() { Side::Col } else { Side::Row };
        let (n_e, n_k) = match kept {
            Side::Col => (graph.rows(), graph.cols()),
            Side::Row => (graph.cols(), graph.rows()),
        };
        let mut e_ptr = vec![0; n_e + 1];
        let mut e_nbr_orig = Vec::with_capacity(graph.edges().len());
        let mut e_mult = Vec::with_capacity(graph.edges().len());
        for e in 0..n_e {
            match kept {
                Side::Col => {
                    for edge in graph.row_edges(e) {
                        e_nbr_orig.push(edge.col);
                        e_mult.push(edge.mult);
                    }
                }
                Side::Row => {
                    for edge in graph.col_edges(e) {
                        e_nbr_orig.push(edge.row);
                        e_mult.push(edge.mult);
                    }
                }
            }
            e_ptr[e + 1] = e_nbr_orig.len();
        }
        let mut adj = vec![Vec::new(); n_k];
        for e in 0..n_e {
            let nb = &e_nbr_orig[e_ptr[e]..e_ptr[e + 1]];
            for (a, &ka) in nb.iter().enumerate() {
                for &kb in &nb[a + 1..] {
                    adj[ka].push(kb);
                    adj[kb].push(ka);
                }
            }
        }
        let sym = SymbolicLdl::analyze(&adj, max_fill)?;
        drop(adj);
        let mut pair_ptr = vec![0; n_e + 1];
        let mut pair_slot = Vec::new();
        for e in 0..n_e {
            let nb = &e_nbr_orig[e_ptr[e]..e_ptr[e + 1]];
            for (a, &ka) in nb.iter().enumerate() {
                for &kb in &nb[a + 1..] {
                    pair_slot.push(sym.slot(ka, kb).expect("pair in projected pattern"));
                }
            }
            pair_ptr[e + 1] = pair_slot.len();
        }
        let e_nbr: Vec<usize> = e_nbr_orig.iter().map(|&k| sym.diag_index(k)).collect();
        let (e_deg_src, k_deg_src) = match kept {
            Side::Col => (graph.row_degrees(), graph.col_degrees()),
            Side::Row => (graph.col_degrees(), graph.row_degrees()),
        };
        let mut k_deg = vec![0.0; n_k];
        for (k, &d) in k_deg_src.iter().enumerate() {
            k_deg[sym.diag_index(k)] = d;
        }
        let pin = n_k - 1;
        let pin_slots = (0..n_k)
            .filter(|&k| sym.diag_index(k) != pin)
            .filter_map(|k| sym.slot(k, sym.perm()[pin]))
            .collect();
        Some(ReducedSystem {
            rows: graph.rows(),
            cols: graph.cols(),
            kept,
            e_deg: e_deg_src.to_vec(),
            k_deg,
            e_ptr,
            e_nbr,
            e_mult,
            pair_ptr,
            pair_slot,
            sym,
            pin_slots,
        })
    }

    pub fn kept_side(&self) -> Side {
        self.kept
    }

    pub fn n_kept(&self) -> usize {
        self.k_deg.len()
    }

    pub fn n_eliminated(&self) -> usize {
        self.e_deg.len()
    }

    pub fn symbolic(&self) -> &SymbolicLdl {
        &self.sym
    }

    /// Precisions ordered as (eliminated side, kept side).
    fn oriented(&self, scale: PriorScale) -> (f64, f64) {
        match self.kept {
            Side::Col => (scale.lambda_a, scale.lambda_b),
            Side::Row => (scale.lambda_b, scale.lambda_a),
        }
    }

    fn normalized(&self, e: usize, p: usize) -> f64 {
        let k = self.e_nbr[p];
        self.e_mult[p] / (self.e_deg[e] * self.k_deg[k]).sqrt()
    }

    /// Factorization of `L + Λ*`.
    pub fn factor_shifted(&self, scale: PriorScale, with_traces: bool) -> Result<ReducedFactor<'_>> {
        scale.validate()?;
        let (le, lk) = self.oriented(scale);
        let s = scale.phi * (le * lk).sqrt();
        let pivot: Vec<f64> = self.e_deg.iter().map(|d| d + le).collect();
        let mut coupling = Vec::with_capacity(self.e_mult.len());
        for e in 0..self.e_deg.len() {
            for p in self.e_ptr[e]..self.e_ptr[e + 1] {
                coupling.push(self.e_mult[p] - s * self.normalized(e, p));
            }
        }
        let base: Vec<f64> = self.k_deg.iter().map(|d| d + lk).collect();
        self.factor_values(pivot, coupling, base, with_traces, false)
    }

    /// Factorization of L with the last kept node grounded; its solves apply a
    /// generalized inverse of L.
    pub fn factor_grounded(&self, with_traces: bool) -> Result<ReducedFactor<'_>> {
        let pivot = self.e_deg.clone();
        let coupling = self.e_mult.clone();
        let base = self.k_deg.clone();
        self.factor_values(pivot, coupling, base, with_traces, true)
    }

    /// `log det(I - φ𝒜)`.
    pub fn logdet_correlation(&self, phi: f64) -> Result<f64> {
        if phi == 0.0 {
            return Ok(0.0);
        }
        let pivot = vec![1.0; self.e_deg.len()];
        let mut coupling = Vec::with_capacity(self.e_mult.len());
        for e in 0..self.e_deg.len() {
            for p in self.e_ptr[e]..self.e_ptr[e + 1] {
                coupling.push(-phi * self.normalized(e, p));
            }
        }
        let base = vec![1.0; self.k_deg.len()];
        Ok(self.factor_values(pivot, coupling, base, false, false)?.logdet())
    }

    /// `log det Λ* = r log λ_a + c log λ_b + log det(I - φ𝒜)`.
    pub fn logdet_prior(&self, scale: PriorScale) -> Result<f64> {
        if !(scale.lambda_a > 0.0 && scale.lambda_b > 0.0) {
            return Err(Error::InvalidHyperparams("log det Λ* requires positive precisions".into()));
        }
        Ok(self.rows as f64 * scale.lambda_a.ln()
            + self.cols as f64 * scale.lambda_b.ln()
            + self.logdet_correlation(scale.phi)?)
    }

    fn factor_values(
        &self,
        pivot: Vec<f64>,
        coupling: Vec<f64>,
        base: Vec<f64>,
        with_traces: bool,
        pinned: bool,
    ) -> Result<ReducedFactor<'_>> {
        let (mut kd, mut kx) = self.sym.zeros();
        kd.copy_from_slice(&base);
        let (mut md, mut mx) = if with_traces { self.sym.zeros() } else { (Vec::new(), Vec::new()) };
        for e in 0..pivot.len() {
            let inv = 1.0 / pivot[e];
            let inv2 = inv * inv;
            let (p0, p1) = (self.e_ptr[e], self.e_ptr[e + 1]);
            let mut q = self.pair_ptr[e];
            for a in p0..p1 {
                let ca = coupling[a];
                let ka = self.e_nbr[a];
                kd[ka] -= ca * ca * inv;
                if with_traces {
                    md[ka] += ca * ca * inv2;
                }
                for b in a + 1..p1 {
                    let cab = ca * coupling[b];
                    let slot = self.pair_slot[q];
                    q += 1;
                    kx[slot] -= cab * inv;
                    if with_traces {
                        mx[slot] += cab * inv2;
                    }
                }
            }
        }
        if pinned {
            let pin = kd.len() - 1;
            kd[pin] = 1.0;
            for &s in &self.pin_slots {
                kx[s] = 0.0;
            }
        }
        let num = self.sym.factor(kd, kx)?;
        Ok(ReducedFactor {
            sys: self,
            pivot,
            coupling,
            num,
            pinned,
            m: if with_traces { Some((md, mx)) } else { None },
        })
    }
}

/// Numeric factorization of `G` (or grounded L) for one set of hyperparameters.
#[derive(Debug, Clone)]
pub struct ReducedFactor<'s> {
    sys: &'s ReducedSystem,
    pivot: Vec<f64>,
    coupling: Vec<f64>,
    num: NumericLdl<'s>,
    pinned: bool,
    m: Option<(Vec<f64>, Vec<f64>)>,
}

impl<'s> ReducedFactor<'s> {
    fn split_global(&self, b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let sys = self.sys;
        let r = sys.rows;
        let (be, bk_orig) = match sys.kept {
            Side::Col => (&b[..r], &b[r..]),
            Side::Row => (&b[r..], &b[..r]),
        };
        let bk: Vec<f64> = sys.sym.perm().iter().map(|&old| bk_orig[old]).collect();
        (be.to_vec(), bk)
    }

    /// Solves `G x = b` for a full-length vector `(alpha, beta)`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let sys = self.sys;
        let (be, mut y) = self.split_global(b);
        for e in 0..be.len() {
            let t = be[e] / self.pivot[e];
            if t != 0.0 {
                for p in sys.e_ptr[e]..sys.e_ptr[e + 1] {
                    y[sys.e_nbr[p]] -= self.coupling[p] * t;
                }
            }
        }
        if self.pinned {
            let last = y.len() - 1;
            y[last] = 0.0;
        }
        self.num.solve_permuted_in_place(&mut y);
        let mut out = vec![0.0; b.len()];
        let r = sys.rows;
        let (e_off, k_off) = match sys.kept {
            Side::Col => (0, r),
            Side::Row => (r, 0),
        };
        for e in 0..be.len() {
            let mut acc = be[e];
            for p in sys.e_ptr[e]..sys.e_ptr[e + 1] {
                acc -= self.coupling[p] * y[sys.e_nbr[p]];
            }
            out[e_off + e] = acc / self.pivot[e];
        }
        for (new, &old) in sys.sym.perm().iter().enumerate() {
            out[k_off + old] = y[new];
        }
        out
    }

    /// `log det G`. Not defined for the grounded factor.
    pub fn logdet(&self) -> f64 {
        debug_assert!(!self.pinned);
        self.pivot.iter().map(|p| p.ln()).sum::<f64>() + self.num.logdet()
    }

    /// Traces of the diagonal blocks of `G^{-1}` (of the grounded inverse when pinned).
    pub fn block_traces(&self) -> Result<BlockTraces> {
        let (md, mx) = self
            .m
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("factor built without trace data".into()))?;
        let z = self.num.selected_inverse();
        let mut kk = z.trace();
        let mut coupled = z.trace_product(md, mx);
        if self.pinned {
            let last = md.len() - 1;
            kk -= z.diag[last];
            coupled -= z.diag[last] * md[last];
        }
        let ee = self.pivot.iter().map(|p| 1.0 / p).sum::<f64>() + coupled;
        Ok(match self.sys.kept {
            Side::Col => BlockTraces { aa: ee, bb: kk },
            Side::Row => BlockTraces { aa: kk, bb: ee },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_graph;
    use nalgebra::{DMatrix, DVector};

    fn dense_g(g: &BipartiteGraph, s: PriorScale) -> DMatrix<f64> {
        g.dense_laplacian() + dense_prior_precision(g, s)
    }

    #[test]
    fn single_match_logdet() {
        let g = BipartiteGraph::from_matches(1, 1, &[(0, 0)]).unwrap();
        let sys = ReducedSystem::new(&g, usize::MAX).unwrap();
        let f = sys.factor_shifted(PriorScale::new(1.0, 1.0, 0.0), false).unwrap();
        assert!((f.logdet() - 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn star_operator_matches_dense_inverse() {
        let g = BipartiteGraph::from_matches(1, 2, &[(0, 0), (0, 1)]).unwrap();
        let s = PriorScale::new(1.0, 1.0, 0.0);
        let op = ShiftedPrecisionOperator::new(&g, s).unwrap();
        let gd = dense_g(&g, s);
        for k in 0..3 {
            let mut e = vec![0.0; 3];
            e[k] = 1.0;
            let out = op.apply(&e).unwrap();
            for i in 0..3 {
                assert!((out[i] - gd[(i, k)]).abs() < 1e-15);
            }
        }
        let sys = ReducedSystem::new(&g, usize::MAX).unwrap();
        let f = sys.factor_shifted(s, false).unwrap();
        let x = f.solve(&[1.0, 0.0, 0.0]);
        let inv = gd.try_inverse().unwrap();
        for i in 0..3 {
            assert!((x[i] - inv[(i, 0)]).abs() < 1e-14);
        }
    }

    #[test]
    fn reduced_factor_matches_dense() {
        for (seed, (r, c)) in [(12, 5), (6, 9), (20, 4), (7, 7)].into_iter().enumerate() {
            let g = random_graph(r, c, 2, seed as u64);
            let sys = ReducedSystem::new(&g, usize::MAX).unwrap();
            for s in [PriorScale::new(0.3, 2.0, 0.4), PriorScale::new(1.5, 0.2, -0.7), PriorScale::new(0.0, 1.0, 0.0)] {
                let f = sys.factor_shifted(s, true).unwrap();
                let gd = dense_g(&g, s);
                let inv = gd.clone().try_inverse().unwrap();
                let ld = gd.clone().cholesky().unwrap().l().diagonal().map(|v| v.ln()).sum() * 2.0;
                assert!((f.logdet() - ld).abs() < 1e-9);
                let b: Vec<f64> = (0..g.dim()).map(|k| (k as f64 * 0.3).sin()).collect();
                let x = f.solve(&b);
                let xd = &inv * DVector::from_column_slice(&b);
                for k in 0..g.dim() {
                    assert!((x[k] - xd[k]).abs() < 1e-10);
                }
                let t = f.block_traces().unwrap();
                let aa: f64 = (0..r).map(|k| inv[(k, k)]).sum();
                let bb: f64 = (r..r + c).map(|k| inv[(k, k)]).sum();
                assert!((t.aa - aa).abs() < 1e-9 * aa.abs().max(1.0));
                assert!((t.bb - bb).abs() < 1e-9 * bb.abs().max(1.0));
                if s.lambda_a > 0.0 {
                    let lp = dense_prior_precision(&g, s);
                    let ldp = lp.cholesky().unwrap().l().diagonal().map(|v| v.ln()).sum() * 2.0;
                    assert!((sys.logdet_prior(s).unwrap() - ldp).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn grounded_factor_is_generalized_inverse() {
        let g = random_graph(9, 4, 2, 42);
        let sys = ReducedSystem::new(&g, usize::MAX).unwrap();
        let f = sys.factor_grounded(true).unwrap();
        let l = g.dense_laplacian();
        let n = g.dim();
        let mut lg = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            let x = f.solve(&e);
            for i in 0..n {
                lg[(i, k)] = x[i];
            }
        }
        let recon = &l * &lg * &l;
        assert!((recon - &l).abs().max() < 1e-10);
        let t = f.block_traces().unwrap();
        let aa: f64 = (0..9).map(|k| lg[(k, k)]).sum();
        let bb: f64 = (9..n).map(|k| lg[(k, k)]).sum();
        assert!((t.aa - aa).abs() < 1e-10);
        assert!((t.bb - bb).abs() < 1e-10);
    }

    #[test]
    fn phi_zero_spectrum_bounded_below() {
        let g = random_graph(10, 5, 2, 3);
        let s = PriorScale::new(0.7, 1.3, 0.0);
        let op = ShiftedPrecisionOperator::new(&g, s).unwrap();
        for k in 0..50 {
            let v: Vec<f64> = (0..g.dim()).map(|i| ((i * 7 + k * 13) as f64).sin()).collect();
            let gv = op.apply(&v).unwrap();
            let q: f64 = v.iter().zip(&gv).map(|(a, b)| a * b).sum::<f64>() / v.iter().map(|a| a * a).sum::<f64>();
            assert!(q >= 0.7 - 1e-12);
        }
    }

    #[test]
    fn rejects_invalid_scale() {
        let g = random_graph(3, 2, 2, 1);
        assert!(ShiftedPrecisionOperator::new(&g, PriorScale::new(1.0, 1.0, 1.0)).is_err());
        assert!(ShiftedPrecisionOperator::new(&g, PriorScale::new(-1.0, 1.0, 0.0)).is_err());
        assert!(ShiftedPrecisionOperator::new(&g, PriorScale::new(0.0, 0.0, 0.0)).is_err());
    }
}
