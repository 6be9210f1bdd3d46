//! Connected components of the bipartite graph and largest-component extraction.

use crate::error::Result;
use crate::graph::bipartite::BipartiteGraph;
use crate::graph::panel::MatchedPanel;

/// Component labels for every unit. Component 0 is the largest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    pub row_labels: Vec<usize>,
    pub col_labels: Vec<usize>,
    /// Number of units (rows plus columns) in each component.
    pub sizes: Vec<usize>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Labels components over `r + c` units given a list of (row, col) links.
/// Ordering: size descending, then smallest unit index (rows before columns).
fn label(rows: usize, cols: usize, links: impl Iterator<Item = (usize, usize)>) -> Components {
    let n = rows + cols;
    let mut uf = UnionFind::new(n);
    for (i, j) in links {
        uf.union(i, rows + j);
    }
    let mut root_of = vec![usize::MAX; n];
    let mut raw = vec![0; n];
    let mut first: Vec<usize> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    for u in 0..n {
        let root = uf.find(u);
        if root_of[root] == usize::MAX {
            root_of[root] = first.len();
            first.push(u);
            sizes.push(0);
        }
        raw[u] = root_of[root];
        sizes[raw[u]] += 1;
    }
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(first[a].cmp(&first[b])));
    let mut rank = vec![0; order.len()];
    for (pos, &k) in order.iter().enumerate() {
        rank[k] = pos;
    }
    Components {
        row_labels: raw[..rows].iter().map(|&k| rank[k]).collect(),
        col_labels: raw[rows..].iter().map(|&k| rank[k]).collect(),
        sizes: order.iter().map(|&k| sizes[k]).collect(),
    }
}

pub fn connected_components(graph: &BipartiteGraph) -> Components {
    label(graph.rows(), graph.cols(), graph.edges().iter().map(|e| (e.row, e.col)))
}

/// Components of a panel, counting units without observations as singletons.
pub fn panel_components(panel: &MatchedPanel) -> Components {
    label(
        panel.rows(),
        panel.cols(),
        panel.row_ids().iter().copied().zip(panel.col_ids().iter().copied()),
    )
}

/// Restricts the panel to its largest connected component, re-indexing densely.
pub fn largest_component(panel: &MatchedPanel) -> Result<MatchedPanel> {
    let comps = panel_components(panel);
    let keep_row: Vec<bool> = comps.row_labels.iter().map(|&k| k == 0).collect();
    let keep_col: Vec<bool> = comps.col_labels.iter().map(|&k| k == 0).collect();
    panel.restrict(&keep_row, &keep_col)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::bipartite::build_graph;
    use crate::graph::panel::Observation;

    fn panel(rows: usize, cols: usize, matches: &[(usize, usize, usize)]) -> MatchedPanel {
        let obs = matches
            .iter()
            .map(|&(i, t, j)| Observation { row: i, period: t, col: j, y: (i + j) as f64, x: vec![] })
            .collect();
        MatchedPanel::new(rows, cols, 3, obs, vec![]).unwrap()
    }

    #[test]
    fn disjoint_matches_have_two_components() {
        let g = BipartiteGraph::from_matches(2, 2, &[(0, 0), (1, 1)]).unwrap();
        let c = connected_components(&g);
        assert_eq!(c.count(), 2);
        assert_eq!(c.sizes, vec![2, 2]);
        assert_eq!(c.row_labels, vec![0, 1]);
    }

    #[test]
    fn star_is_connected() {
        let g = BipartiteGraph::from_matches(1, 2, &[(0, 0), (0, 1)]).unwrap();
        assert_eq!(connected_components(&g).count(), 1);
    }

    #[test]
    fn largest_component_extraction_is_idempotent() {
        let p = panel(4, 3, &[(0, 0, 0), (1, 0, 1), (2, 0, 2), (2, 1, 1), (3, 0, 2)]);
        let q = largest_component(&p).unwrap();
        assert_eq!((q.rows(), q.cols()), (3, 2));
        assert_eq!(q.row_labels(), &[2, 3, 4]);
        assert_eq!(q.col_labels(), &[2, 3]);
        let g = build_graph(&q).unwrap();
        assert_eq!(connected_components(&g).count(), 1);
        let again = largest_component(&q).unwrap();
        assert_eq!(again, q);
    }

    #[test]
    fn ties_broken_by_smallest_id() {
        let p = panel(2, 2, &[(1, 0, 0), (0, 0, 1)]);
        let c = panel_components(&p);
        assert_eq!(c.row_labels, vec![0, 1]);
        let q = largest_component(&p).unwrap();
        assert_eq!(q.col_labels(), &[2]);
    }
}
