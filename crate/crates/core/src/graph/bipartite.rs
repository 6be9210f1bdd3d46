//! Sparse incidence structure of a matched panel.

use crate::error::{Error, Result, Side};
use crate::graph::panel::MatchedPanel;

/// One aggregated edge between a row unit and a column unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub row: usize,
    pub col: usize,
    /// Number of periods in which the pair was matched.
    pub mult: f64,
}

/// Bipartite graph `B = [B1 B2]` stored as one (row, col) index pair per observation.
///
/// Vectors over all units are laid out as `(alpha_1..alpha_r, beta_1..beta_c)`.
#[derive(Debug, Clone)]
pub struct BipartiteGraph {
    rows: usize,
    cols: usize,
    obs_row: Vec<usize>,
    obs_col: Vec<usize>,
    deg_row: Vec<f64>,
    deg_col: Vec<f64>,
    edges: Vec<Edge>,
    row_ptr: Vec<usize>,
    col_ptr: Vec<usize>,
    col_edges: Vec<usize>,
}

/// Builds the graph for a panel. Every unit must have at least one observation.
pub fn build_graph(panel: &MatchedPanel) -> Result<BipartiteGraph> {
    BipartiteGraph::from_observations(
        panel.rows(),
        panel.cols(),
        panel.row_ids().to_vec(),
        panel.col_ids().to_vec(),
    )
}

impl BipartiteGraph {
    pub fn from_observations(
        rows: usize,
        cols: usize,
        obs_row: Vec<usize>,
        obs_col: Vec<usize>,
    ) -> Result<Self> {
        if obs_row.len() != obs_col.len() {
            return Err(Error::DimensionMismatch { expected: obs_row.len(), got: obs_col.len() });
        }
        let mut deg_row = vec![0.0; rows];
        let mut deg_col = vec![0.0; cols];
        let mut pairs = Vec::with_capacity(obs_row.len());
        for (&i, &j) in obs_row.iter().zip(&obs_col) {
            if i >= rows {
                return Err(Error::IdOutOfRange { what: "row", id: i + 1, max: rows });
            }
            if j >= cols {
                return Err(Error::IdOutOfRange { what: "column", id: j + 1, max: cols });
            }
            deg_row[i] += 1.0;
            deg_col[j] += 1.0;
            pairs.push((i, j));
        }
        if let Some(i) = deg_row.iter().position(|&d| d == 0.0) {
            return Err(Error::ZeroDegree { side: Side::Row, id: i + 1 });
        }
        if let Some(j) = deg_col.iter().position(|&d| d == 0.0) {
            return Err(Error::ZeroDegree { side: Side::Col, id: j + 1 });
        }
        pairs.sort_unstable();
        let mut edges: Vec<Edge> = Vec::new();
        for (i, j) in pairs {
            match edges.last_mut() {
                Some(e) if e.row == i && e.col == j => e.mult += 1.0,
                _ => edges.push(Edge { row: i, col: j, mult: 1.0 }),
            }
        }
        let mut row_ptr = vec![0; rows + 1];
        let mut col_ptr = vec![0; cols + 1];
        for e in &edges {
            row_ptr[e.row + 1] += 1;
            col_ptr[e.col + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        for j in 0..cols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut fill = col_ptr.clone();
        let mut col_edges = vec![0; edges.len()];
        for (k, e) in edges.iter().enumerate() {
            col_edges[fill[e.col]] = k;
            fill[e.col] += 1;
        }
        Ok(BipartiteGraph {
            rows,
            cols,
            obs_row,
            obs_col,
            deg_row,
            deg_col,
            edges,
            row_ptr,
            col_ptr,
            col_edges,
        })
    }

    /// Convenience constructor from (row, col) matches.
    pub fn from_matches(rows: usize, cols: usize, matches: &[(usize, usize)]) -> Result<Self> {
        let (r, c): (Vec<_>, Vec<_>) = matches.iter().copied().unzip();
        Self::from_observations(rows, cols, r, c)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Total number of units, `r + c`.
    pub fn dim(&self) -> usize {
        self.rows + self.cols
    }

    /// Number of observations (rows of B).
    pub fn n_obs(&self) -> usize {
        self.obs_row.len()
    }

    pub fn obs_rows(&self) -> &[usize] {
        &self.obs_row
    }

    pub fn obs_cols(&self) -> &[usize] {
        &self.obs_col
    }

    pub fn row_degrees(&self) -> &[f64] {
        &self.deg_row
    }

    pub fn col_degrees(&self) -> &[f64] {
        &self.deg_col
    }

    /// Degree vector `(d_a, d_b)`, i.e. the diagonal of L.
    pub fn degrees(&self) -> Vec<f64> {
        let mut d = self.deg_row.clone();
        d.extend_from_slice(&self.deg_col);
        d
    }

    /// Aggregated edges sorted by (row, col).
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edges incident to row unit `i`.
    pub fn row_edges(&self, i: usize) -> &[Edge] {
        &self.edges[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Edges incident to column unit `j`, sorted by row.
    pub fn col_edges(&self, j: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.col_edges[self.col_ptr[j]..self.col_ptr[j + 1]].iter().map(move |&k| &self.edges[k])
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: len });
        }
        Ok(())
    }

    /// `L v` with `L = B'B`.
    pub fn laplacian_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v.len())?;
        let mut out = vec![0.0; self.dim()];
        self.laplacian_apply_into(v, &mut out);
        Ok(out)
    }

    /// Unchecked variant writing into `out`.
    pub fn laplacian_apply_into(&self, v: &[f64], out: &mut [f64]) {
        let r = self.rows;
        let (va, vb) = v.split_at(r);
        let (oa, ob) = out.split_at_mut(r);
        for i in 0..r {
            oa[i] = self.deg_row[i] * va[i];
        }
        for j in 0..self.cols {
            ob[j] = self.deg_col[j] * vb[j];
        }
        for e in &self.edges {
            oa[e.row] += e.mult * vb[e.col];
            ob[e.col] += e.mult * va[e.row];
        }
    }

    /// `𝒜 v` with `𝒜 = D^{-1/2} A D^{-1/2}`, A the bipartite adjacency with multiplicities.
    pub fn normalized_adjacency_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v.len())?;
        let r = self.rows;
        let mut out = vec![0.0; self.dim()];
        for e in &self.edges {
            let w = self.normalized_weight(e);
            out[e.row] += w * v[r + e.col];
            out[r + e.col] += w * v[e.row];
        }
        Ok(out)
    }

    /// Entry of the off-diagonal block of the normalized adjacency for an edge.
    pub fn normalized_weight(&self, e: &Edge) -> f64 {
        e.mult / (self.deg_row[e.row] * self.deg_col[e.col]).sqrt()
    }

    /// `B'y`, of length `r + c`.
    pub fn bt_apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n_obs() {
            return Err(Error::DimensionMismatch { expected: self.n_obs(), got: y.len() });
        }
        let r = self.rows;
        let mut out = vec![0.0; self.dim()];
        for (o, &yo) in y.iter().enumerate() {
            out[self.obs_row[o]] += yo;
            out[r + self.obs_col[o]] += yo;
        }
        Ok(out)
    }

    /// `B theta`, of length n.
    pub fn b_apply(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(theta.len())?;
        let r = self.rows;
        Ok(self
            .obs_row
            .iter()
            .zip(&self.obs_col)
            .map(|(&i, &j)| theta[i] + theta[r + j])
            .collect())
    }

    /// The null direction `(1_r, -1_c)` of L.
    pub fn null_vector(&self) -> Vec<f64> {
        let mut u = vec![1.0; self.rows];
        u.extend(std::iter::repeat_n(-1.0, self.cols));
        u
    }

    /// Dense `L` (tests and small instances only).
    pub fn dense_laplacian(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let r = self.rows;
        let mut l = nalgebra::DMatrix::zeros(n, n);
        for i in 0..r {
            l[(i, i)] = self.deg_row[i];
        }
        for j in 0..self.cols {
            l[(r + j, r + j)] = self.deg_col[j];
        }
        for e in &self.edges {
            l[(e.row, r + e.col)] += e.mult;
            l[(r + e.col, e.row)] += e.mult;
        }
        l
    }

    /// Dense incidence matrix B (n x (r+c)).
    pub fn dense_incidence(&self) -> nalgebra::DMatrix<f64> {
        let mut b = nalgebra::DMatrix::zeros(self.n_obs(), self.dim());
        for o in 0..self.n_obs() {
            b[(o, self.obs_row[o])] = 1.0;
            b[(o, self.rows + self.obs_col[o])] = 1.0;
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn star() -> BipartiteGraph {
        BipartiteGraph::from_matches(1, 2, &[(0, 0), (0, 1)]).unwrap()
    }

    #[test]
    fn one_match_per_unit() {
        let g = BipartiteGraph::from_matches(2, 2, &[(0, 0), (1, 1)]).unwrap();
        assert_eq!(g.row_degrees(), &[1.0, 1.0]);
        assert_eq!(g.col_degrees(), &[1.0, 1.0]);
        assert_eq!(g.n_obs(), 2);
    }

    #[test]
    fn star_laplacian() {
        let g = star();
        assert_eq!(g.degrees(), vec![2.0, 1.0, 1.0]);
        assert_eq!(g.laplacian_apply(&[1.0, 0.0, 0.0]).unwrap(), vec![2.0, 1.0, 1.0]);
        let l = g.dense_laplacian();
        assert_eq!(l[(0, 1)], 1.0);
        assert_eq!(l[(0, 2)], 1.0);
    }

    #[test]
    fn star_normalized_adjacency() {
        let g = star();
        let out = g.normalized_adjacency_apply(&[0.0, 1.0, 0.0]).unwrap();
        assert!((out[0] - 0.5f64.sqrt()).abs() < 1e-15);
        let g = BipartiteGraph::from_matches(2, 2, &[(0, 1), (1, 0)]).unwrap();
        let out = g.normalized_adjacency_apply(&[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(out, vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_degree_rejected() {
        let err = BipartiteGraph::from_matches(2, 1, &[(0, 0)]).unwrap_err();
        assert!(matches!(err, Error::ZeroDegree { side: Side::Row, id: 2 }));
    }

    #[test]
    fn dimension_checked() {
        assert!(star().laplacian_apply(&[1.0]).is_err());
    }

    pub(crate) fn arb_graph() -> impl Strategy<Value = BipartiteGraph> {
        (1usize..8, 1usize..6, 1usize..4).prop_flat_map(|(r, c, t)| {
            proptest::collection::vec(0..c, r * t).prop_map(move |cols| {
                let mut rows: Vec<usize> = (0..r).flat_map(|i| std::iter::repeat_n(i, t)).collect();
                let mut cols = cols;
                // make sure every column appears
                for j in 0..c {
                    rows.push(j % r);
                    cols.push(j);
                }
                BipartiteGraph::from_observations(r, c, rows, cols).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn null_vector_in_kernel(g in arb_graph()) {
            let lu = g.laplacian_apply(&g.null_vector()).unwrap();
            prop_assert!(lu.iter().all(|v| v.abs() <= 1e-12));
        }

        #[test]
        fn laplacian_matches_dense(g in arb_graph(), seed in 0u64..1000) {
            let b = g.dense_incidence();
            let l = b.transpose() * &b;
            let v: Vec<f64> = (0..g.dim()).map(|k| ((k as u64 * 31 + seed) % 17) as f64 - 8.0).collect();
            let out = g.laplacian_apply(&v).unwrap();
            let dense = &l * nalgebra::DVector::from_vec(v);
            for k in 0..g.dim() {
                prop_assert!((out[k] - dense[k]).abs() <= 1e-12);
            }
            let sum_a: f64 = g.row_degrees().iter().sum();
            let sum_b: f64 = g.col_degrees().iter().sum();
            prop_assert_eq!(sum_a, g.n_obs() as f64);
            prop_assert_eq!(sum_b, g.n_obs() as f64);
        }

        #[test]
        fn normalized_adjacency_is_symmetric_and_contractive(g in arb_graph()) {
            let n = g.dim();
            let v: Vec<f64> = (0..n).map(|k| (k as f64 * 0.37).sin()).collect();
            let w: Vec<f64> = (0..n).map(|k| (k as f64 * 1.3).cos()).collect();
            let av = g.normalized_adjacency_apply(&v).unwrap();
            let aw = g.normalized_adjacency_apply(&w).unwrap();
            let lhs: f64 = w.iter().zip(&av).map(|(a, b)| a * b).sum();
            let rhs: f64 = v.iter().zip(&aw).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nav = av.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(nav <= nv * (1.0 + 1e-10));
        }
    }
}
