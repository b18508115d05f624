mod common;
#[path = "support/tape_programs.rs"]
mod tape_programs;

use std::collections::BTreeSet;
use std::sync::Arc;

use diffprog_core::analysis::*;
use diffprog_core::graph::normalize_adjacency;
use diffprog_core::primitives::*;
use diffprog_core::tensor::{Binary, Unary};
use diffprog_core::{NodeId, Op, ParamStore, Tape, Tensor};

/// All-pairs hop counts from boolean matrix powers: `dist[i][j]` is the
/// smallest `k` with `(A^k)[i][j]` set.
fn matrix_power_distances(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<Option<usize>>> {
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in edges {
        adj[a][b] = true;
    }
    let mut dist = vec![vec![None; n]; n];
    let mut power: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j).collect()).collect();
    for k in 0..=n {
        for i in 0..n {
            for j in 0..n {
                if power[i][j] && dist[i][j].is_none() {
                    dist[i][j] = Some(k);
                }
            }
        }
        let mut next = vec![vec![false; n]; n];
        for i in 0..n {
            for m in 0..n {
                if power[i][m] {
                    for j in 0..n {
                        next[i][j] |= adj[m][j];
                    }
                }
            }
        }
        power = next;
    }
    dist
}

#[test]
fn paths_match_matrix_power_oracle() {
    for seed in 0..5 {
        let (tape, _) = tape_programs::random_program(seed, 45);
        let n = tape.len();
        assert!(n >= 50);
        let edges = tape_programs::edge_list(&tape);
        let oracle = matrix_power_distances(n, &edges);
        for i in 0..n {
            for j in 0..n {
                let got = shortest_path_length(&tape, NodeId::from_index(i), NodeId::from_index(j)).unwrap();
                assert_eq!(got, oracle[i][j], "seed {seed}: {i} -> {j}");
            }
        }
    }
}

#[test]
fn dump_skeleton_agrees_with_tape() {
    let (tape, y) = tape_programs::random_program(17, 30);
    let sk = TapeSkeleton::parse(&tape.dump()).unwrap();
    for i in 0..tape.len() {
        let id = NodeId::from_index(i);
        assert_eq!(
            shortest_path_in(&sk, i, y.index()).unwrap(),
            shortest_path_length(&tape, id, y).unwrap()
        );
        let deps: BTreeSet<usize> = dependency_set(&tape, id)
            .unwrap()
            .into_iter()
            .map(|n| n.index())
            .collect();
        assert_eq!(dependency_set_in(&sk, i).unwrap(), deps);
    }
}

fn unrolled_rnn(steps: usize) -> (Tape, Vec<NodeId>, NodeId) {
    let mut rng = common::rng(31);
    let mut store = ParamStore::new();
    RnnParams::init(&mut store, "rnn", 2, 3, &mut rng).unwrap();
    let mut tape = Tape::new();
    let p = RnnParams::bind(&mut tape, &store, "rnn").unwrap();
    let mut h = tape.input(Tensor::zeros(&[3]));
    let mut xs = Vec::new();
    for _ in 0..steps {
        let x = tape.input(common::uniform(&mut rng, &[2]));
        xs.push(x);
        h = rnn_cell(&mut tape, h, x, &p).unwrap();
    }
    (tape, xs, h)
}

#[test]
fn rnn_path_grows_with_distance() {
    let (tape, xs, y) = unrolled_rnn(5);
    let profile = path_profile(&tape, &xs, y).unwrap();
    let lengths: Vec<usize> = xs.iter().rev().map(|x| profile.lengths[x].unwrap()).collect();
    assert!(lengths.windows(2).all(|w| w[0] < w[1]), "{lengths:?}");
    assert!(!profile.is_uniform());
}

#[test]
fn full_attention_paths_are_uniform() {
    let n = 4;
    let mut rng = common::rng(32);
    let mut store = ParamStore::new();
    AttentionParams::init(&mut store, "att", 3, &mut rng).unwrap();
    let mut tape = Tape::new();
    let rows: Vec<NodeId> = (0..n).map(|_| tape.input(common::uniform(&mut rng, &[3]))).collect();
    let x = tape.record(Op::Stack, &rows).unwrap();
    let p = AttentionParams::bind(&mut tape, &store, "att").unwrap();
    let y = self_attention(&mut tape, x, &Arc::new(AttentionPattern::full(n)), &p).unwrap();
    for t in 0..n {
        let out = tape.record(Op::Row(t), &[y]).unwrap();
        let profile = path_profile(&tape, &rows, out).unwrap();
        assert!(profile.is_uniform(), "{profile:?}");
    }
}

#[test]
fn dense_layer_paths_are_uniform() {
    let mut rng = common::rng(33);
    let mut store = ParamStore::new();
    DenseParams::init(&mut store, "l", 3, 2, &mut rng).unwrap();
    let mut tape = Tape::new();
    let x = tape.input(common::uniform(&mut rng, &[3]));
    let p = DenseParams::bind(&mut tape, &store, "l").unwrap();
    let y = dense(&mut tape, x, &p, Activation::Tanh).unwrap();
    let profile = path_profile(&tape, &[x, p.weight, p.bias], y).unwrap();
    assert_eq!(profile.lengths[&x], Some(3));
    assert_eq!(profile.lengths[&p.bias], Some(2));
}

#[test]
fn branch_dependencies_are_the_union() {
    let mut tape = Tape::new();
    let a = tape.input(Tensor::vector(vec![1.0, 2.0]));
    let b = tape.input(Tensor::vector(vec![3.0, 4.0]));
    let c = tape.input(Tensor::scalar(0.2));
    let y = tape.record(Op::Binary(Binary::Mul), &[a, b]).unwrap();
    let z = tape.record(Op::Unary(Unary::Exp), &[b]).unwrap();
    let gate = tape.record(Op::Unary(Unary::Sigmoid), &[c]).unwrap();
    let out = diff_branch(&mut tape, gate, y, z).unwrap();
    let union: BTreeSet<NodeId> = [gate, y, z]
        .iter()
        .flat_map(|&n| dependency_set(&tape, n).unwrap())
        .collect();
    assert_eq!(dependency_set(&tape, out).unwrap(), union);
    assert_eq!(union, BTreeSet::from([a, b, c]));
}

/// Two GCN layers written node by node so that each node's features are a
/// separate tape input.
#[test]
fn gcn_dependencies_are_two_hop_neighborhoods() {
    let n = 7;
    let pairs: Vec<(usize, usize)> = (0..n - 1).map(|v| (v, v + 1)).collect();
    let g = common::graph_from_pairs(n, &pairs, 2);
    let a_hat = normalize_adjacency(&g, true);
    let mut rng = common::rng(34);
    let mut store = ParamStore::new();
    GcnParams::init(&mut store, "g1", 3, 4, &mut rng).unwrap();
    GcnParams::init(&mut store, "g2", 4, 2, &mut rng).unwrap();
    let mut tape = Tape::new();
    let xs: Vec<NodeId> = (0..n).map(|_| tape.input(common::uniform(&mut rng, &[3]))).collect();
    let mut h = xs.clone();
    for prefix in ["g1", "g2"] {
        let p = GcnParams::bind(&mut tape, &store, prefix).unwrap();
        let wt = tape.record(Op::Transpose, &[p.weight]).unwrap();
        let msgs: Vec<NodeId> = h.iter().map(|&v| tape.record(Op::MatMul, &[wt, v]).unwrap()).collect();
        h = (0..n)
            .map(|v| {
                let mut acc = p.bias;
                for (j, w) in a_hat.row(v) {
                    let m = tape.record(Op::Scale(w), &[msgs[j]]).unwrap();
                    acc = tape.record(Op::Binary(Binary::Add), &[acc, m]).unwrap();
                }
                tape.record(Op::Unary(Unary::Relu), &[acc]).unwrap()
            })
            .collect();
    }
    let inputs: BTreeSet<NodeId> = xs.iter().copied().collect();
    for v in 0..n {
        let hops = common::bfs_hops(n, &pairs, v);
        let expected: BTreeSet<NodeId> = (0..n)
            .filter(|&u| hops[u].is_some_and(|d| d <= 2))
            .map(|u| xs[u])
            .collect();
        let got: BTreeSet<NodeId> = dependency_set(&tape, h[v])
            .unwrap()
            .intersection(&inputs)
            .copied()
            .collect();
        assert_eq!(got, expected, "node {v}");
    }
}

#[test]
fn unknown_ids_rejected() {
    let (tape, _, _) = unrolled_rnn(2);
    let bad = NodeId::from_index(tape.len());
    assert!(shortest_path_length(&tape, bad, bad).is_err());
    assert!(dependency_set(&tape, bad).is_err());
    assert!(path_profile(&tape, &[bad], NodeId::from_index(0)).is_err());
}
