//! Structural queries over recorded programs: shortest input→output paths
//! and backward dependency sets.
//!
//! Paths count recorded ops, one hop per edge `input → consumer`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::autodiff::{NodeId, Tape, KIND_NAMES};
use crate::error::{Error, Result};

/// Read-only DAG view shared by live tapes and parsed dumps.
pub trait ProgramGraph {
    fn node_count(&self) -> usize;
    fn inputs_of(&self, id: usize) -> &[usize];
    fn is_leaf(&self, id: usize) -> bool;

    fn check(&self, id: usize) -> Result<()> {
        if id < self.node_count() {
            Ok(())
        } else {
            Err(Error::UnknownNode {
                id,
                len: self.node_count(),
            })
        }
    }
}

/// Adjacency built once from a tape (`NodeId` vectors flattened to indices).
struct TapeView<'a> {
    tape: &'a Tape,
    inputs: Vec<Vec<usize>>,
}

impl<'a> TapeView<'a> {
    fn new(tape: &'a Tape) -> Self {
        let inputs = tape
            .nodes()
            .iter()
            .map(|n| n.inputs().iter().map(|i| i.index()).collect())
            .collect();
        Self { tape, inputs }
    }
}

impl ProgramGraph for TapeView<'_> {
    fn node_count(&self) -> usize {
        self.inputs.len()
    }

    fn inputs_of(&self, id: usize) -> &[usize] {
        &self.inputs[id]
    }

    fn is_leaf(&self, id: usize) -> bool {
        self.tape.nodes()[id].op().is_leaf()
    }
}

/// A tape reconstructed from its text dump: structure only, no values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TapeSkeleton {
    pub kinds: Vec<String>,
    pub inputs: Vec<Vec<usize>>,
    pub shapes: Vec<Vec<usize>>,
}

fn bracketed(s: &str, line: usize) -> Result<(&str, &str)> {
    let s = s.trim_start();
    let bad = || Error::Dump {
        line,
        reason: format!("expected a bracketed list in {s:?}"),
    };
    let rest = s.strip_prefix('[').ok_or_else(bad)?;
    let end = rest.find(']').ok_or_else(bad)?;
    Ok((&rest[..end], &rest[end + 1..]))
}

fn numbers(list: &str, sep: char, line: usize) -> Result<Vec<usize>> {
    list.split(sep)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse().map_err(|_| Error::Dump {
                line,
                reason: format!("not a number: {s:?}"),
            })
        })
        .collect()
}

impl TapeSkeleton {
    /// Parses the output of [`Tape::dump`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut sk = TapeSkeleton {
            kinds: Vec::new(),
            inputs: Vec::new(),
            shapes: Vec::new(),
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let mut parts = raw.trim().splitn(3, ' ');
            let (Some(id), Some(kind), Some(rest)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Dump {
                    line,
                    reason: "expected `id kind [inputs] [shape]`".into(),
                });
            };
            let id: usize = id.parse().map_err(|_| Error::Dump {
                line,
                reason: format!("bad id {id:?}"),
            })?;
            if id != sk.kinds.len() {
                return Err(Error::Dump {
                    line,
                    reason: format!("id {id} out of sequence"),
                });
            }
            if !KIND_NAMES.contains(&kind) {
                return Err(Error::UnknownKind(kind.to_string()));
            }
            let (ins, rest) = bracketed(rest, line)?;
            let (shape, tail) = bracketed(rest, line)?;
            if !tail.trim().is_empty() {
                return Err(Error::Dump {
                    line,
                    reason: format!("trailing text {tail:?}"),
                });
            }
            let ins = numbers(ins, ' ', line)?;
            if let Some(&bad) = ins.iter().find(|&&i| i >= id) {
                return Err(Error::Dump {
                    line,
                    reason: format!("input {bad} does not precede node {id}"),
                });
            }
            sk.kinds.push(kind.to_string());
            sk.inputs.push(ins);
            sk.shapes.push(numbers(shape, ',', line)?);
        }
        Ok(sk)
    }
}

impl ProgramGraph for TapeSkeleton {
    fn node_count(&self) -> usize {
        self.kinds.len()
    }

    fn inputs_of(&self, id: usize) -> &[usize] {
        &self.inputs[id]
    }

    fn is_leaf(&self, id: usize) -> bool {
        matches!(self.kinds[id].as_str(), "input" | "parameter")
    }
}

/// Hop count of the shortest directed path `from → … → to`, or `None`.
pub fn shortest_path_in(g: &impl ProgramGraph, from: usize, to: usize) -> Result<Option<usize>> {
    g.check(from)?;
    g.check(to)?;
    if from == to {
        return Ok(Some(0));
    }
    if from > to {
        return Ok(None);
    }
    // Walk backwards from `to`; ids below `from` can never lead to it.
    let mut dist = vec![usize::MAX; to + 1];
    dist[to] = 0;
    let mut queue = VecDeque::from([to]);
    while let Some(v) = queue.pop_front() {
        for &u in g.inputs_of(v) {
            if u >= from && dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                if u == from {
                    return Ok(Some(dist[u]));
                }
                queue.push_back(u);
            }
        }
    }
    Ok(None)
}

/// Backward closure of `node` restricted to leaves.
pub fn dependency_set_in(g: &impl ProgramGraph, node: usize) -> Result<BTreeSet<usize>> {
    g.check(node)?;
    let mut seen = vec![false; node + 1];
    seen[node] = true;
    let mut stack = vec![node];
    let mut leaves = BTreeSet::new();
    while let Some(v) = stack.pop() {
        if g.is_leaf(v) {
            leaves.insert(v);
        }
        for &u in g.inputs_of(v) {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    Ok(leaves)
}

pub fn shortest_path_length(tape: &Tape, from: NodeId, to: NodeId) -> Result<Option<usize>> {
    shortest_path_in(&TapeView::new(tape), from.index(), to.index())
}

pub fn dependency_set(tape: &Tape, node: NodeId) -> Result<BTreeSet<NodeId>> {
    Ok(dependency_set_in(&TapeView::new(tape), node.index())?
        .into_iter()
        .map(NodeId)
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathProfile {
    pub output: NodeId,
    /// `None` when the input does not reach the output.
    pub lengths: BTreeMap<NodeId, Option<usize>>,
}

impl PathProfile {
    /// True when every listed input reaches the output in the same number of hops.
    pub fn is_uniform(&self) -> bool {
        let mut it = self.lengths.values();
        match it.next() {
            Some(Some(first)) => it.all(|l| *l == Some(*first)),
            _ => false,
        }
    }
}

pub fn path_profile(tape: &Tape, inputs: &[NodeId], output: NodeId) -> Result<PathProfile> {
    let view = TapeView::new(tape);
    let mut lengths = BTreeMap::new();
    for &i in inputs {
        lengths.insert(i, shortest_path_in(&view, i.index(), output.index())?);
    }
    Ok(PathProfile { output, lengths })
}
