//! One-mode projection of the bipartite graph onto column units.

use crate::error::{Error, Result};
use crate::graph::bipartite::BipartiteGraph;
use crate::sparse_linalg::sparse::SymSparse;

/// `L_{2,⊥} = B2'(I - B1 (B1'B1)^{-1} B1')B2`, the column-unit Laplacian after
/// partialling out row effects. Row sums are zero.
pub fn projected_laplacian(graph: &BipartiteGraph) -> SymSparse {
    let da = graph.row_degrees();
    let mut diag = graph.col_degrees().to_vec();
    let mut triplets = Vec::new();
    for i in 0..graph.rows() {
        let nb = graph.row_edges(i);
        let inv = 1.0 / da[i];
        for (a, ea) in nb.iter().enumerate() {
            diag[ea.col] -= ea.mult * ea.mult * inv;
            for eb in &nb[a + 1..] {
                triplets.push((eb.col, ea.col, -ea.mult * eb.mult * inv));
            }
        }
    }
    SymSparse::from_triplets(diag, triplets)
}

/// Normalized projected Laplacian `Δ^{-1/2} L_{2,⊥} Δ^{-1/2}` with `Δ = diag(L_{2,⊥})`,
/// together with `Δ^{1/2}` (whose direction spans the kernel when connected).
pub fn normalized_projected_laplacian(graph: &BipartiteGraph) -> Result<(SymSparse, Vec<f64>)> {
    let l = projected_laplacian(graph);
    normalize(&l)
}

pub(crate) fn normalize(l: &SymSparse) -> Result<(SymSparse, Vec<f64>)> {
    let scale = l.diag().iter().map(|d| d.max(0.0).sqrt()).collect::<Vec<_>>();
    let tiny = 1e-12 * l.diag().iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if let Some(j) = l.diag().iter().position(|&d| d <= tiny) {
        return Err(Error::InvalidInput(format!(
            "column unit {} is isolated in the projected graph",
            j + 1
        )));
    }
    let inv: Vec<f64> = scale.iter().map(|s| 1.0 / s).collect();
    Ok((l.scaled(&inv), scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn dense_projection(g: &BipartiteGraph) -> DMatrix<f64> {
        let b = g.dense_incidence();
        let b1 = b.columns(0, g.rows()).into_owned();
        let b2 = b.columns(g.rows(), g.cols()).into_owned();
        let d1 = b1.transpose() * &b1;
        let d1inv = DMatrix::from_diagonal(&d1.diagonal().map(|v| 1.0 / v));
        let p = DMatrix::identity(g.n_obs(), g.n_obs()) - &b1 * d1inv * b1.transpose();
        b2.transpose() * p * b2
    }

    #[test]
    fn star_projection() {
        let g = BipartiteGraph::from_matches(1, 2, &[(0, 0), (0, 1)]).unwrap();
        let l = projected_laplacian(&g).to_dense();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]));
    }

    #[test]
    fn disjoint_projection_is_zero() {
        let g = BipartiteGraph::from_matches(2, 2, &[(0, 0), (1, 1)]).unwrap();
        let l = projected_laplacian(&g).to_dense();
        assert!(l.iter().all(|v| v.abs() < 1e-15));
        assert!(normalized_projected_laplacian(&g).is_err());
    }

    #[test]
    fn matches_dense_formula() {
        let matches = [(0, 0), (0, 1), (1, 1), (1, 2), (2, 0), (2, 2), (2, 0), (3, 3), (3, 1)];
        let g = BipartiteGraph::from_matches(4, 4, &matches).unwrap();
        let l = projected_laplacian(&g).to_dense();
        let d = dense_projection(&g);
        assert!((l - &d).abs().max() <= 1e-12);
        let ones = nalgebra::DVector::from_element(4, 1.0);
        assert!((d * ones).abs().max() <= 1e-12);
    }

    #[test]
    fn normalized_has_unit_diagonal() {
        let g = BipartiteGraph::from_matches(3, 3, &[(0, 0), (0, 1), (1, 1), (1, 2), (2, 2), (2, 0)])
            .unwrap();
        let (n, s) = normalized_projected_laplacian(&g).unwrap();
        assert!(n.diag().iter().all(|d| (d - 1.0).abs() < 1e-14));
        let y = n.apply(&s);
        assert!(y.iter().all(|v| v.abs() < 1e-12));
    }
}
