//! Citation graphs: validation, statistics, adjacency normalization, edge
//! perturbations and node-subset selection.

mod io;

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::primitives::AttentionPattern;
use crate::sparse::SparseMatrix;
use crate::tensor::Mask;

pub use io::{load, save, FILE_NAMES};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {reason}")]
    Parse {
        file: &'static str,
        line: usize,
        reason: String,
    },
    #[error("{what}: header declares {declared}, found {found}")]
    CountMismatch {
        what: &'static str,
        declared: usize,
        found: usize,
    },
    #[error("edge ({src}, {dst}) outside 0..{num_nodes}")]
    EdgeOutOfBounds { src: usize, dst: usize, num_nodes: usize },
    #[error("edge ({src}, {dst}) has no reverse entry")]
    Asymmetric { src: usize, dst: usize },
    #[error("node {node} has label {label}, expected < {classes}")]
    LabelOutOfRange { node: usize, label: usize, classes: usize },
    #[error("feature matrix is {found:?}, expected [{rows}, {cols}]")]
    FeatureShape {
        found: [usize; 2],
        rows: usize,
        cols: usize,
    },
    #[error("split {split} refers to node {node} outside 0..{num_nodes}")]
    SplitOutOfBounds {
        split: &'static str,
        node: usize,
        num_nodes: usize,
    },
    #[error("node {node} appears more than once across splits")]
    OverlappingSplits { node: usize },
    #[error("fraction {0} outside [0, 1]")]
    FractionOutOfRange(f64),
    #[error("unknown node subset {0:?} (expected train, val, test or first:N)")]
    UnknownSpec(String),
    #[error("first:{n} outside 1..={num_nodes}")]
    SpecOutOfRange { n: usize, num_nodes: usize },
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    fn named(&self) -> [(&'static str, &[usize]); 3] {
        [("train", &self.train), ("val", &self.val), ("test", &self.test)]
    }
}

/// A node-classification graph. Immutable once built; perturbations return
/// new graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct CitationGraph {
    num_nodes: usize,
    num_classes: usize,
    feature_dim: usize,
    edges: Vec<(usize, usize)>,
    features: SparseMatrix,
    labels: Vec<usize>,
    splits: Splits,
}

impl CitationGraph {
    /// Validates bounds, label range, feature shape and split disjointness.
    /// Edges are stored sorted; symmetry is not required here.
    pub fn new(
        num_classes: usize,
        mut edges: Vec<(usize, usize)>,
        features: SparseMatrix,
        labels: Vec<usize>,
        splits: Splits,
    ) -> Result<Self> {
        let num_nodes = labels.len();
        let feature_dim = features.cols();
        if features.rows() != num_nodes {
            return Err(GraphError::FeatureShape {
                found: features.shape(),
                rows: num_nodes,
                cols: feature_dim,
            });
        }
        if let Some(&(src, dst)) = edges.iter().find(|(s, d)| *s >= num_nodes || *d >= num_nodes) {
            return Err(GraphError::EdgeOutOfBounds { src, dst, num_nodes });
        }
        if let Some((node, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(GraphError::LabelOutOfRange {
                node,
                label,
                classes: num_classes,
            });
        }
        let mut seen = vec![false; num_nodes];
        for (split, ids) in splits.named() {
            for &node in ids {
                if node >= num_nodes {
                    return Err(GraphError::SplitOutOfBounds { split, node, num_nodes });
                }
                if std::mem::replace(&mut seen[node], true) {
                    return Err(GraphError::OverlappingSplits { node });
                }
            }
        }
        edges.sort_unstable();
        Ok(Self {
            num_nodes,
            num_classes,
            feature_dim,
            edges,
            features,
            labels,
            splits,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Directed entries, sorted by `(src, dst)`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &SparseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    /// First entry lacking its reverse, if any (multiplicities are compared).
    pub fn asymmetric_edge(&self) -> Option<(usize, usize)> {
        let mut reversed: Vec<(usize, usize)> = self.edges.iter().map(|&(s, d)| (d, s)).collect();
        reversed.sort_unstable();
        self.edges.iter().zip(&reversed).find(|(a, b)| a != b).map(|(&e, _)| e)
    }

    pub fn is_symmetric(&self) -> bool {
        self.asymmetric_edge().is_none()
    }

    fn with_edges(&self, edges: Vec<(usize, usize)>) -> Self {
        let mut g = self.clone();
        g.edges = edges;
        g.edges.sort_unstable();
        g
    }

    /// Neighbor sets of the simple undirected graph (no self-loops, no
    /// duplicates).
    pub fn undirected_neighbors(&self) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); self.num_nodes];
        for &(s, d) in &self.edges {
            if s != d {
                adj[s].insert(d);
                adj[d].insert(s);
            }
        }
        adj
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub num_nodes: usize,
    pub directed_edge_entries: usize,
    pub average_degree: f64,
    pub average_clustering: f64,
    pub isolated_nodes: usize,
}

impl fmt::Display for GraphStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nodes              {}", self.num_nodes)?;
        writeln!(f, "directed entries   {}", self.directed_edge_entries)?;
        writeln!(f, "average degree     {:.3}", self.average_degree)?;
        writeln!(f, "average clustering {:.3}", self.average_clustering)?;
        write!(f, "isolated nodes     {}", self.isolated_nodes)
    }
}

pub fn stats(g: &CitationGraph) -> GraphStats {
    let adj = g.undirected_neighbors();
    let mut clustering_sum = 0.0;
    for nbrs in &adj {
        let k = nbrs.len();
        if k < 2 {
            continue;
        }
        let links = nbrs
            .iter()
            .map(|&u| adj[u].iter().filter(|w| **w > u && nbrs.contains(w)).count())
            .sum::<usize>();
        clustering_sum += 2.0 * links as f64 / (k * (k - 1)) as f64;
    }
    let n = g.num_nodes.max(1) as f64;
    GraphStats {
        num_nodes: g.num_nodes,
        directed_edge_entries: g.edges.len(),
        average_degree: g.edges.len() as f64 / n,
        average_clustering: clustering_sum / n,
        isolated_nodes: adj.iter().filter(|a| a.is_empty()).count(),
    }
}

/// Symmetrically normalized adjacency. Entry `(dst, src)` carries the
/// message along edge `src → dst`, so row `v` aggregates over the in-edges
/// of `v`. With `self_loops` the identity is added first; duplicate entries
/// add up. Degrees are row sums; zero-degree rows stay zero.
pub fn normalize_adjacency(g: &CitationGraph, self_loops: bool) -> SparseMatrix {
    let n = g.num_nodes;
    let mut entries: Vec<(usize, usize, f64)> = g.edges.iter().map(|&(s, d)| (d, s, 1.0)).collect();
    if self_loops {
        entries.extend((0..n).map(|v| (v, v, 1.0)));
    }
    let a = SparseMatrix::from_summed(n, n, entries).expect("edges validated at construction");
    let inv_sqrt: Vec<f64> = a
        .row_sums()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let scaled = a
        .entries()
        .iter()
        .map(|&(r, c, v)| (r, c, inv_sqrt[r] * v * inv_sqrt[c]))
        .collect();
    SparseMatrix::new(n, n, scaled).expect("same coordinates")
}

/// Replaces every directed entry with one whose endpoints are drawn
/// uniformly with `src ≠ dst`. The result is generally not symmetric.
pub fn randomize_edges(g: &CitationGraph, seed: u64) -> CitationGraph {
    let n = g.num_nodes;
    if n < 2 {
        return g.with_edges(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = (0..g.edges.len())
        .map(|_| {
            let src = rng.random_range(0..n);
            let mut dst = rng.random_range(0..n - 1);
            if dst >= src {
                dst += 1;
            }
            (src, dst)
        })
        .collect();
    g.with_edges(edges)
}

/// Removes `round(fraction · U)` of the `U` unique undirected pairs, sampled
/// without replacement, dropping every entry of each removed pair.
pub fn remove_edges(g: &CitationGraph, fraction: f64, seed: u64) -> Result<CitationGraph> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(GraphError::FractionOutOfRange(fraction));
    }
    let pairs: Vec<(usize, usize)> = g
        .edges
        .iter()
        .map(|&(s, d)| (s.min(d), s.max(d)))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let k = (fraction * pairs.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let removed: HashSet<(usize, usize)> = sample(&mut rng, pairs.len(), k).into_iter().map(|i| pairs[i]).collect();
    let kept = g
        .edges
        .iter()
        .copied()
        .filter(|&(s, d)| !removed.contains(&(s.min(d), s.max(d))))
        .collect();
    Ok(g.with_edges(kept))
}

/// `mask[u][v]` is set iff `(u, v)` is an edge, or `u == v` with `include_self`.
pub fn neighbor_mask(g: &CitationGraph, include_self: bool) -> Mask {
    let mut m = if include_self {
        Mask::diagonal(g.num_nodes)
    } else {
        Mask::empty(g.num_nodes, g.num_nodes)
    };
    for &(s, d) in &g.edges {
        m.set(s, d, true);
    }
    m
}

/// Same scope as [`neighbor_mask`] in compressed form.
pub fn neighbor_pattern(g: &CitationGraph, include_self: bool) -> crate::tensor::Result<AttentionPattern> {
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); g.num_nodes];
    for &(s, d) in &g.edges {
        rows[s].push(d);
    }
    for (v, row) in rows.iter_mut().enumerate() {
        if include_self {
            row.push(v);
        }
        row.sort_unstable();
        row.dedup();
    }
    AttentionPattern::from_rows(g.num_nodes, &rows)
}

/// A named node subset: one of the splits or the first `N` nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MaskSpec {
    Train,
    Val,
    Test,
    First(usize),
}

impl FromStr for MaskSpec {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(MaskSpec::Train),
            "val" => Ok(MaskSpec::Val),
            "test" => Ok(MaskSpec::Test),
            _ => s
                .strip_prefix("first:")
                .and_then(|n| n.parse().ok())
                .map(MaskSpec::First)
                .ok_or_else(|| GraphError::UnknownSpec(s.to_string())),
        }
    }
}

impl TryFrom<String> for MaskSpec {
    type Error = GraphError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MaskSpec> for String {
    fn from(m: MaskSpec) -> String {
        m.to_string()
    }
}

impl fmt::Display for MaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskSpec::Train => f.write_str("train"),
            MaskSpec::Val => f.write_str("val"),
            MaskSpec::Test => f.write_str("test"),
            MaskSpec::First(n) => write!(f, "first:{n}"),
        }
    }
}

pub fn mask_from_spec(g: &CitationGraph, spec: MaskSpec) -> Result<Vec<usize>> {
    Ok(match spec {
        MaskSpec::Train => g.splits.train.clone(),
        MaskSpec::Val => g.splits.val.clone(),
        MaskSpec::Test => g.splits.test.clone(),
        MaskSpec::First(n) => {
            if n == 0 || n > g.num_nodes {
                return Err(GraphError::SpecOutOfRange {
                    n,
                    num_nodes: g.num_nodes,
                });
            }
            (0..n).collect()
        }
    })
}
