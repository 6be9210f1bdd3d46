//! Symmetric sparse matrix in compressed lower-triangular form.

use nalgebra::DMatrix;

/// Symmetric matrix storing the diagonal densely and the strictly lower triangle
/// column-wise (row indices sorted within each column).
#[derive(Debug, Clone, PartialEq)]
pub struct SymSparse {
    n: usize,
    diag: Vec<f64>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SymSparse {
    /// Builds from a diagonal and off-diagonal triplets `(i, j, v)` with `i != j`.
    /// Each unordered pair may appear several times (values are summed) and in
    /// either orientation.
    pub fn from_triplets(diag: Vec<f64>, triplets: Vec<(usize, usize, f64)>) -> Self {
        let n = diag.len();
        let mut t: Vec<(usize, usize, f64)> = triplets
            .into_iter()
            .map(|(i, j, v)| if i > j { (j, i, v) } else { (i, j, v) })
            .collect();
        debug_assert!(t.iter().all(|&(c, r, _)| c < r && r < n));
        t.sort_unstable_by_key(|a| (a.0, a.1));
        let mut col_ptr = vec![0; n + 1];
        let mut row_idx = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (c, r, v) in t {
            if last == Some((c, r)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_ptr[c + 1] += 1;
                row_idx.push(r);
                vals.push(v);
                last = Some((c, r));
            }
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        SymSparse { n, diag, col_ptr, row_idx, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Number of stored strictly-lower entries.
    pub fn nnz_lower(&self) -> usize {
        self.vals.len()
    }

    /// Iterates `(row, col, value)` over the strictly lower triangle.
    pub fn lower_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |p| (self.row_idx[p], c, self.vals[p]))
        })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            y[i] = self.diag[i] * x[i];
        }
        for c in 0..self.n {
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[p];
                let v = self.vals[p];
                y[r] += v * x[c];
                y[c] += v * x[r];
            }
        }
    }

    /// Copy with `shift` added to every diagonal entry.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        out.diag.iter_mut().for_each(|d| *d += shift);
        out
    }

    /// `S A S` for the diagonal scaling `S = diag(s)`.
    pub fn scaled(&self, s: &[f64]) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            out.diag[i] *= s[i] * s[i];
        }
        for c in 0..self.n {
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                out.vals[p] *= s[self.row_idx[p]] * s[c];
            }
        }
        out
    }

    /// Symmetric off-diagonal adjacency lists (sorted).
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for (r, c, _) in self.lower_entries() {
            adj[r].push(c);
            adj[c].push(r);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn max_abs_row_sum(&self) -> f64 {
        let mut s: Vec<f64> = self.diag.iter().map(|d| d.abs()).collect();
        for (r, c, v) in self.lower_entries() {
            s[r] += v.abs();
            s[c] += v.abs();
        }
        s.into_iter().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.diag));
        for (r, c, v) in self.lower_entries() {
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
        m
    }
}
