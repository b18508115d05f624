#![allow(dead_code)]

use diffprog_core::graph::{CitationGraph, Splits};
use diffprog_core::SparseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CLASSES: usize = 3;
const WORDS_PER_CLASS: usize = 12;
const SHARED_WORDS: usize = 24;

/// Citation-like graph where labels cycle through the classes, features are
/// sparse word indicators drawn mostly from a class vocabulary, and edges
/// mostly join nodes of the same class.
pub fn homophilous_graph(n: usize, seed: u64) -> CitationGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = CLASSES * WORDS_PER_CLASS + SHARED_WORDS;
    let labels: Vec<usize> = (0..n).map(|v| v % CLASSES).collect();
    let mut entries = Vec::new();
    for (v, &c) in labels.iter().enumerate() {
        let mut words: Vec<usize> = (0..4)
            .map(|_| {
                if rng.random::<f64>() < 0.35 {
                    c * WORDS_PER_CLASS + rng.random_range(0..WORDS_PER_CLASS)
                } else {
                    rng.random_range(0..dim)
                }
            })
            .collect();
        words.sort_unstable();
        words.dedup();
        entries.extend(words.into_iter().map(|w| (v, w, 1.0)));
    }
    let mut pairs = std::collections::BTreeSet::new();
    for v in 0..n {
        for _ in 0..2 {
            let u = if rng.random::<f64>() < 0.85 {
                labels[v] + CLASSES * rng.random_range(0..n / CLASSES)
            } else {
                rng.random_range(0..n)
            };
            if u != v && u < n {
                pairs.insert((v.min(u), v.max(u)));
            }
        }
    }
    let edges = pairs.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
    let splits = Splits {
        train: (0..n / 10).collect(),
        val: (n / 10..n / 4).collect(),
        test: (n / 2..n).collect(),
    };
    CitationGraph::new(
        CLASSES,
        edges,
        SparseMatrix::new(n, dim, entries).unwrap(),
        labels,
        splits,
    )
    .unwrap()
}
