//! Sparse LDLᵀ factorization with minimum-degree ordering and selected inversion.
//!
//! The symbolic phase is done once per sparsity pattern; numeric factorizations
//! for different values reuse it. Values are assembled directly into the factor
//! storage through [`SymbolicLdl::slot`].

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::sparse_linalg::sparse::SymSparse;

/// Fill pattern and ordering for a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymbolicLdl {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// `iperm[old] = new`.
    iperm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// For each row, the `(column, position)` pairs of its off-diagonal entries.
    row_ptr: Vec<usize>,
    row_entries: Vec<(usize, usize)>,
    /// Flattened positions of `(S[b], S[a])`, `a < b`, for each column structure `S`.
    pair_ptr: Vec<usize>,
    pair_pos: Vec<usize>,
}

fn merge_into(out: &mut Vec<usize>, a: &[usize], b: &[usize], skip: usize, skip2: usize) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let v = if j >= b.len() || (i < a.len() && a[i] < b[j]) {
            i += 1;
            a[i - 1]
        } else if i >= a.len() || b[j] < a[i] {
            j += 1;
            b[j - 1]
        } else {
            i += 1;
            j += 1;
            a[i - 1]
        };
        if v != skip && v != skip2 {
            out.push(v);
        }
    }
}

impl SymbolicLdl {
    /// Minimum-degree analysis of the pattern given by sorted adjacency lists.
    /// Returns `None` if the filled factor would exceed `max_fill` off-diagonal entries.
    pub fn analyze(adjacency: &[Vec<usize>], max_fill: usize) -> Option<Self> {
        let n = adjacency.len();
        let mut adj: Vec<Vec<usize>> = adjacency.to_vec();
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        let mut eliminated = vec![false; n];
        let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
            (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
        let mut perm = Vec::with_capacity(n);
        let mut structs: Vec<Vec<usize>> = Vec::with_capacity(n);
        let mut fill = 0usize;
        let mut scratch = Vec::new();
        while let Some(Reverse((deg, p))) = heap.pop() {
            if eliminated[p] || deg != adj[p].len() {
                continue;
            }
            eliminated[p] = true;
            let nb = std::mem::take(&mut adj[p]);
            fill += nb.len();
            if fill > max_fill {
                return None;
            }
            for &q in &nb {
                merge_into(&mut scratch, &adj[q], &nb, p, q);
                std::mem::swap(&mut adj[q], &mut scratch);
                heap.push(Reverse((adj[q].len(), q)));
            }
            perm.push(p);
            structs.push(nb);
        }
        let mut iperm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        let mut col_ptr = vec![0; n + 1];
        let mut row_idx = Vec::with_capacity(fill);
        for (k, s) in structs.iter().enumerate() {
            let mut rows: Vec<usize> = s.iter().map(|&old| iperm[old]).collect();
            rows.sort_unstable();
            row_idx.extend_from_slice(&rows);
            col_ptr[k + 1] = row_idx.len();
        }
        let mut row_count = vec![0; n + 1];
        for &r in &row_idx {
            row_count[r + 1] += 1;
        }
        for i in 0..n {
            row_count[i + 1] += row_count[i];
        }
        let row_ptr = row_count.clone();
        let mut next = row_count;
        let mut row_entries = vec![(0, 0); row_idx.len()];
        for k in 0..n {
            for p in col_ptr[k]..col_ptr[k + 1] {
                let r = row_idx[p];
                row_entries[next[r]] = (k, p);
                next[r] += 1;
            }
        }
        let mut sym = SymbolicLdl {
            n,
            perm,
            iperm,
            col_ptr,
            row_idx,
            row_ptr,
            row_entries,
            pair_ptr: Vec::new(),
            pair_pos: Vec::new(),
        };
        sym.build_pair_plan();
        Some(sym)
    }

    pub fn for_matrix(a: &SymSparse, max_fill: usize) -> Option<Self> {
        Self::analyze(&a.adjacency(), max_fill)
    }

    fn build_pair_plan(&mut self) {
        let mut pair_ptr = vec![0; self.n + 1];
        let mut pair_pos = Vec::new();
        for j in 0..self.n {
            let s = &self.row_idx[self.col_ptr[j]..self.col_ptr[j + 1]];
            for a in 0..s.len() {
                let k = s[a];
                let mut p = self.col_ptr[k];
                let end = self.col_ptr[k + 1];
                for &target in &s[a + 1..] {
                    while p < end && self.row_idx[p] < target {
                        p += 1;
                    }
                    debug_assert!(p < end && self.row_idx[p] == target);
                    pair_pos.push(p);
                }
            }
            pair_ptr[j + 1] = pair_pos.len();
        }
        self.pair_ptr = pair_ptr;
        self.pair_pos = pair_pos;
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Off-diagonal entries in the filled factor.
    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Work of one selected inversion, in pair updates.
    pub fn pair_count(&self) -> usize {
        self.pair_pos.len()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Position in the permuted diagonal for original index `i`.
    pub fn diag_index(&self, i: usize) -> usize {
        self.iperm[i]
    }

    /// Storage slot of the off-diagonal entry `(i, j)` (original indices), if it
    /// belongs to the filled pattern.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (a, b) = (self.iperm[i], self.iperm[j]);
        let (col, row) = if a < b { (a, b) } else { (b, a) };
        let rows = &self.row_idx[self.col_ptr[col]..self.col_ptr[col + 1]];
        rows.binary_search(&row).ok().map(|p| self.col_ptr[col] + p)
    }

    /// Empty value storage for assembly: (diagonal in permuted order, off-diagonal slots).
    pub fn zeros(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; self.n], vec![0.0; self.nnz()])
    }

    /// Scatters a matrix with a pattern contained in this symbolic structure.
    pub fn assemble(&self, a: &SymSparse) -> (Vec<f64>, Vec<f64>) {
        let (mut d, mut x) = self.zeros();
        for (i, &v) in a.diag().iter().enumerate() {
            d[self.iperm[i]] = v;
        }
        for (r, c, v) in a.lower_entries() {
            let s = self.slot(r, c).expect("entry outside symbolic pattern");
            x[s] += v;
        }
        (d, x)
    }

    /// Numeric factorization of assembled values. Requires positive pivots.
    pub fn factor(&self, diag: Vec<f64>, mut lx: Vec<f64>) -> Result<NumericLdl<'_>> {
        let mut d = diag;
        let mut work = vec![0.0; self.n];
        for j in 0..self.n {
            let (c0, c1) = (self.col_ptr[j], self.col_ptr[j + 1]);
            for p in c0..c1 {
                work[self.row_idx[p]] = lx[p];
            }
            let mut dj = d[j];
            for &(k, pos) in &self.row_entries[self.row_ptr[j]..self.row_ptr[j + 1]] {
                let ljk = lx[pos];
                let f = ljk * d[k];
                dj -= f * ljk;
                for p in pos + 1..self.col_ptr[k + 1] {
                    work[self.row_idx[p]] -= f * lx[p];
                }
            }
            if !(dj > 0.0) || !dj.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: self.perm[j], value: dj });
            }
            d[j] = dj;
            let inv = 1.0 / dj;
            for p in c0..c1 {
                let r = self.row_idx[p];
                lx[p] = work[r] * inv;
                work[r] = 0.0;
            }
        }
        Ok(NumericLdl { sym: self, d, lx })
    }
}

/// Numeric factor `P A P' = L D L'` with unit lower-triangular L.
#[derive(Debug, Clone)]
pub struct NumericLdl<'a> {
    sym: &'a SymbolicLdl,
    d: Vec<f64>,
    lx: Vec<f64>,
}

/// Selected inverse: entries of `A^{-1}` on the filled pattern (same layout as the factor).
#[derive(Debug, Clone)]
pub struct SelectedInverse {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

impl<'a> NumericLdl<'a> {
    pub fn symbolic(&self) -> &'a SymbolicLdl {
        self.sym
    }

    pub fn logdet(&self) -> f64 {
        self.d.iter().map(|d| d.ln()).sum()
    }

    /// Pivots in elimination order.
    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    /// Solves `A x = b` (original ordering).
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let s = self.sym;
        let mut y: Vec<f64> = s.perm.iter().map(|&old| b[old]).collect();
        self.solve_permuted_in_place(&mut y);
        let mut x = vec![0.0; s.n];
        for (new, &old) in s.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Solve in the permuted ordering, in place.
    pub fn solve_permuted_in_place(&self, y: &mut [f64]) {
        solve_permuted(self.sym, &self.d, &self.lx, y);
    }

    /// Entries of the inverse on the filled pattern (Takahashi recurrence).
    pub fn selected_inverse(&self) -> SelectedInverse {
        let s = self.sym;
        let mut zd = vec![0.0; s.n];
        let mut zx = vec![0.0; s.nnz()];
        let mut tmp: Vec<f64> = Vec::new();
        for j in (0..s.n).rev() {
            let (c0, c1) = (s.col_ptr[j], s.col_ptr[j + 1]);
            let m = c1 - c0;
            tmp.clear();
            tmp.resize(m, 0.0);
            let rows = &s.row_idx[c0..c1];
            let l = &self.lx[c0..c1];
            for a in 0..m {
                tmp[a] += zd[rows[a]] * l[a];
            }
            let mut q = s.pair_ptr[j];
            for a in 0..m {
                let la = l[a];
                let mut acc = 0.0;
                for b in a + 1..m {
                    let z = zx[s.pair_pos[q]];
                    q += 1;
                    tmp[b] += z * la;
                    acc += z * l[b];
                }
                tmp[a] += acc;
            }
            let mut diag = 1.0 / self.d[j];
            for a in 0..m {
                zx[c0 + a] = -tmp[a];
                diag += tmp[a] * l[a];
            }
            zd[j] = diag;
        }
        SelectedInverse { diag: zd, offdiag: zx }
    }
}

impl SelectedInverse {
    /// `tr[A^{-1} M]` for a symmetric M assembled on the same storage layout.
    pub fn trace_product(&self, m_diag: &[f64], m_off: &[f64]) -> f64 {
        let d: f64 = self.diag.iter().zip(m_diag).map(|(a, b)| a * b).sum();
        let o: f64 = self.offdiag.iter().zip(m_off).map(|(a, b)| a * b).sum();
        d + 2.0 * o
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }
}

fn solve_permuted(s: &SymbolicLdl, d: &[f64], lx: &[f64], y: &mut [f64]) {
    for j in 0..s.n {
        let yj = y[j];
        if yj != 0.0 {
            for p in s.col_ptr[j]..s.col_ptr[j + 1] {
                y[s.row_idx[p]] -= lx[p] * yj;
            }
        }
    }
    for j in 0..s.n {
        y[j] /= d[j];
    }
    for j in (0..s.n).rev() {
        let mut acc = y[j];
        for p in s.col_ptr[j]..s.col_ptr[j + 1] {
            acc -= lx[p] * y[s.row_idx[p]];
        }
        y[j] = acc;
    }
}

/// Owned factorization of a standalone sparse matrix.
#[derive(Debug, Clone)]
pub struct SparseLdl {
    sym: SymbolicLdl,
    d: Vec<f64>,
    lx: Vec<f64>,
}

impl SparseLdl {
    pub fn new(a: &SymSparse) -> Result<Self> {
        let sym = SymbolicLdl::for_matrix(a, usize::MAX).expect("unbounded fill");
        let (d, x) = sym.assemble(a);
        let num = sym.factor(d, x)?;
        let (d, lx) = (num.d, num.lx);
        Ok(SparseLdl { sym, d, lx })
    }

    fn numeric(&self) -> NumericLdl<'_> {
        NumericLdl { sym: &self.sym, d: self.d.clone(), lx: self.lx.clone() }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let s = &self.sym;
        let mut y: Vec<f64> = s.perm.iter().map(|&old| b[old]).collect();
        solve_permuted(s, &self.d, &self.lx, &mut y);
        let mut x = vec![0.0; s.n];
        for (new, &old) in s.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    pub fn logdet(&self) -> f64 {
        self.d.iter().map(|d| d.ln()).sum()
    }

    /// Diagonal of the inverse, in original ordering.
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        let z = self.numeric().selected_inverse();
        let mut out = vec![0.0; self.sym.n];
        for (new, &old) in self.sym.perm.iter().enumerate() {
            out[old] = z.diag[new];
        }
        out
    }
}
