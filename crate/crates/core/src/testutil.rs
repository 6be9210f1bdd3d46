use rand::{Rng, SeedableRng};

use crate::graph::bipartite::BipartiteGraph;

/// Connected random graph: `periods` random matches per row plus a linking chain.
pub(crate) fn random_graph(rows: usize, cols: usize, periods: usize, seed: u64) -> BipartiteGraph {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut m = Vec::new();
    for i in 0..rows {
        for _ in 0..periods {
            m.push((i, rng.random_range(0..cols)));
        }
    }
    for j in 0..cols {
        m.push((rng.random_range(0..rows), j));
    }
    for j in 1..cols {
        m.push((j % rows, j - 1));
        m.push((j % rows, j));
    }
    BipartiteGraph::from_matches(rows, cols, &m).unwrap()
}

pub(crate) fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}
