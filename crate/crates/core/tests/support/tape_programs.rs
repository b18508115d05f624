#![allow(dead_code)]

//! Randomly recorded programs and an edge-list cycle check that knows
//! nothing about how the tape orders its nodes.

use std::collections::VecDeque;

use diffprog_core::tensor::{Binary, Unary};
use diffprog_core::{NodeId, Op, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Records a random program of `ops` operations over vectors of length 3
/// and returns it with a scalar output.
pub fn random_program(seed: u64, ops: usize) -> (Tape, NodeId) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tape = Tape::new();
    let mut vectors: Vec<NodeId> = Vec::new();
    let mut scalars: Vec<NodeId> = Vec::new();
    for _ in 0..rng.random_range(1..4) {
        let v = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        vectors.push(tape.input(Tensor::vector(v)));
    }
    scalars.push(tape.input(Tensor::scalar(rng.random_range(0.0..1.0))));
    for _ in 0..ops {
        let pick = |rng: &mut ChaCha8Rng, from: &[NodeId]| from[rng.random_range(0..from.len())];
        let a = pick(&mut rng, &vectors);
        let b = pick(&mut rng, &vectors);
        let id = match rng.random_range(0..8) {
            0 => tape.record(Op::Binary(Binary::Add), &[a, b]),
            1 => tape.record(Op::Binary(Binary::Sub), &[a, b]),
            2 => tape.record(Op::Binary(Binary::Mul), &[a, b]),
            3 => tape.record(Op::Unary(Unary::Tanh), &[a]),
            4 => tape.record(Op::Unary(Unary::Sigmoid), &[a]),
            5 => tape.record(Op::Scale(rng.random_range(-2.0..2.0)), &[a]),
            6 => {
                let g = pick(&mut rng, &scalars);
                tape.record(Op::Branch, &[g, a, b])
            }
            _ => {
                let s = tape.record(Op::Sum(None), &[a]).unwrap();
                let s = tape.record(Op::Unary(Unary::Sigmoid), &[s]).unwrap();
                scalars.push(s);
                continue;
            }
        }
        .unwrap();
        vectors.push(id);
    }
    let last = *vectors.last().unwrap();
    let y = tape.record(Op::Sum(None), &[last]).unwrap();
    (tape, y)
}

/// Kahn's algorithm over an arbitrary edge list.
pub fn is_acyclic(nodes: usize, edges: &[(usize, usize)]) -> bool {
    let mut indegree = vec![0usize; nodes];
    let mut out = vec![Vec::new(); nodes];
    for &(a, b) in edges {
        out[a].push(b);
        indegree[b] += 1;
    }
    let mut queue: VecDeque<usize> = (0..nodes).filter(|&v| indegree[v] == 0).collect();
    let mut removed = 0;
    while let Some(v) = queue.pop_front() {
        removed += 1;
        for &w in &out[v] {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                queue.push_back(w);
            }
        }
    }
    removed == nodes
}

pub fn edge_list(tape: &Tape) -> Vec<(usize, usize)> {
    tape.edges().map(|(a, b)| (a.index(), b.index())).collect()
}
