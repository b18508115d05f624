#![allow(dead_code)]

use diffprog_core::graph::{CitationGraph, Splits};
use diffprog_core::{SparseMatrix, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Undirected graph stored with both directions of every pair.
pub fn graph_from_pairs(n: usize, pairs: &[(usize, usize)], feature_dim: usize) -> CitationGraph {
    let edges = pairs.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
    let entries = (0..n).map(|v| (v, v % feature_dim, 1.0)).collect();
    CitationGraph::new(
        2,
        edges,
        SparseMatrix::new(n, feature_dim, entries).unwrap(),
        vec![0; n],
        Splits::default(),
    )
    .unwrap()
}

/// Erdős–Rényi style pair list on `n` nodes.
pub fn random_pairs(rng: &mut impl Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random::<f64>() < p {
                pairs.push((a, b));
            }
        }
    }
    pairs
}

/// Hop distances from `source` in an undirected pair list.
pub fn bfs_hops(n: usize, pairs: &[(usize, usize)], source: usize) -> Vec<Option<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in pairs {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut dist = vec![None; n];
    dist[source] = Some(0);
    let mut queue = std::collections::VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        for &u in &adj[v] {
            if dist[u].is_none() {
                dist[u] = Some(dist[v].unwrap() + 1);
                queue.push_back(u);
            }
        }
    }
    dist
}
