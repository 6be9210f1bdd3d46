//! Connectivity diagnostics: components, small Laplacian eigenvalues, mover counts.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::bipartite::BipartiteGraph;
use crate::graph::components::connected_components;
use crate::graph::projection::{normalize, projected_laplacian};
use crate::sparse_linalg::eigen::{smallest_nonzero_eigs_sparse, EigenOptions};
use crate::sparse_linalg::sparse::SymSparse;

/// How many row units link pairs of column units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoverSummary {
    /// Row units matched to more than one column unit.
    pub multi_column_rows: usize,
    /// Column-unit pairs sharing at least one row unit.
    pub linked_pairs: usize,
    pub min_shared: usize,
    pub median_shared: f64,
    pub max_shared: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityReport {
    pub num_components: usize,
    pub component_sizes: Vec<usize>,
    /// Smallest nonzero eigenvalues of L.
    pub rho_full: Vec<f64>,
    /// Smallest nonzero eigenvalues of the projected column Laplacian.
    pub rho_proj: Vec<f64>,
    /// Smallest nonzero eigenvalues of the normalized projected Laplacian.
    pub rho_norm_proj: Vec<f64>,
    /// `sqrt(c) * rho_proj`.
    pub rho_proj_scaled: Vec<f64>,
    pub movers: MoverSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Sparse `L` of the bipartite graph.
pub fn laplacian_matrix(graph: &BipartiteGraph) -> SymSparse {
    let r = graph.rows();
    let trip = graph.edges().iter().map(|e| (r + e.col, e.row, e.mult)).collect();
    SymSparse::from_triplets(graph.degrees(), trip)
}

pub fn mover_summary(graph: &BipartiteGraph) -> MoverSummary {
    let multi_column_rows = (0..graph.rows()).filter(|&i| graph.row_edges(i).len() > 1).count();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..graph.rows() {
        let nb = graph.row_edges(i);
        for (a, ea) in nb.iter().enumerate() {
            for eb in &nb[a + 1..] {
                pairs.push((ea.col, eb.col));
            }
        }
    }
    pairs.sort_unstable();
    let mut counts: Vec<usize> = Vec::new();
    let mut last = None;
    for p in pairs {
        if last == Some(p) {
            *counts.last_mut().unwrap() += 1;
        } else {
            counts.push(1);
            last = Some(p);
        }
    }
    counts.sort_unstable();
    let median_shared = match counts.len() {
        0 => 0.0,
        m if m % 2 == 1 => counts[m / 2] as f64,
        m => (counts[m / 2 - 1] + counts[m / 2]) as f64 / 2.0,
    };
    MoverSummary {
        multi_column_rows,
        linked_pairs: counts.len(),
        min_shared: counts.first().copied().unwrap_or(0),
        median_shared,
        max_shared: counts.last().copied().unwrap_or(0),
    }
}

/// Builds the report with `k` eigenvalues per list. Eigenvalues are skipped (with a
/// note) when the graph is disconnected.
pub fn connectivity_report(graph: &BipartiteGraph, k: usize, opts: &EigenOptions) -> Result<ConnectivityReport> {
    let comps = connected_components(graph);
    let mut report = ConnectivityReport {
        num_components: comps.count(),
        component_sizes: comps.sizes.clone(),
        rho_full: vec![],
        rho_proj: vec![],
        rho_norm_proj: vec![],
        rho_proj_scaled: vec![],
        movers: mover_summary(graph),
        note: None,
    };
    if comps.count() > 1 {
        report.note = Some(format!(
            "graph has {} connected components; eigenvalues skipped (extract the largest component)",
            comps.count()
        ));
        return Ok(report);
    }
    let l = laplacian_matrix(graph);
    report.rho_full = smallest_nonzero_eigs_sparse(&l, &[graph.null_vector()], k, opts)?.values;
    if graph.cols() > 1 {
        let proj = projected_laplacian(graph);
        report.rho_proj = smallest_nonzero_eigs_sparse(&proj, &[vec![1.0; graph.cols()]], k, opts)?.values;
        let (norm, scale) = normalize(&proj)?;
        report.rho_norm_proj = smallest_nonzero_eigs_sparse(&norm, &[scale], k, opts)?.values;
        let sc = (graph.cols() as f64).sqrt();
        report.rho_proj_scaled = report.rho_proj.iter().map(|v| v * sc).collect();
    } else {
        report.note = Some("a single column unit has no projected graph".into());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    #[test]
    fn star_report() {
        let g = BipartiteGraph::from_matches(1, 2, &[(0, 0), (0, 1)]).unwrap();
        let rep = connectivity_report(&g, 1, &EigenOptions::default()).unwrap();
        assert_eq!(rep.num_components, 1);
        assert!((rep.rho_full[0] - 1.0).abs() < 1e-12);
        assert!((rep.rho_proj[0] - 1.0).abs() < 1e-12);
        assert!((rep.rho_norm_proj[0] - 2.0).abs() < 1e-12);
        assert_eq!(rep.movers.multi_column_rows, 1);
        assert_eq!(rep.movers.linked_pairs, 1);
    }

    #[test]
    fn disconnected_report_skips_eigs() {
        let g = BipartiteGraph::from_matches(2, 2, &[(0, 0), (1, 1)]).unwrap();
        let rep = connectivity_report(&g, 2, &EigenOptions::default()).unwrap();
        assert_eq!(rep.num_components, 2);
        assert!(rep.rho_full.is_empty());
        assert!(rep.note.is_some());
    }

    #[test]
    fn weakly_linked_clusters_have_small_rho() {
        let m = [(0, 0), (0, 1), (1, 0), (1, 1), (2, 2), (2, 3), (3, 2), (3, 3), (4, 1), (4, 2)];
        let g = BipartiteGraph::from_matches(5, 4, &m).unwrap();
        let rep = connectivity_report(&g, 3, &EigenOptions::default()).unwrap();
        let eig = SymmetricEigen::new(g.dense_laplacian());
        let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        for i in 0..3 {
            assert!((rep.rho_full[i] - v[i + 1]).abs() < 1e-10);
        }
        assert!(rep.rho_full.windows(2).all(|w| w[0] <= w[1]));
        assert!(rep.rho_full[0] > 0.0 && rep.rho_full[0] < 1.0);
    }
}
