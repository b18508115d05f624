#![allow(dead_code)]

//! Seeded random instances of every primitive, each wrapped as a scalar
//! program `sum(primitive(...) ⊙ r)` over trainable inputs, checked with
//! central differences.

use std::sync::Arc;

use diffprog_core::graph::normalize_adjacency;
use diffprog_core::primitives::{
    cross_entropy, dense, diff_branch, dropout, gcn_layer, rnn_cell, self_attention, Activation, AttentionParams,
    AttentionPattern, DenseParams, GcnParams, RnnParams,
};
use diffprog_core::sparse::spmm;
use diffprog_core::tensor::{binary, matmul, Binary};
use diffprog_core::{gradient_check, Mask, NodeId, Op, ParamStore, Result, SparseMatrix, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PRIMITIVES: [&str; 8] = [
    "dense",
    "diff_branch",
    "self_attention",
    "gcn_layer",
    "rnn_cell",
    "dropout_inference",
    "dropout_training",
    "cross_entropy",
];

pub const STEP: f64 = 1e-6;
pub const KINK_MARGIN: f64 = 1e-3;

type Program = Box<dyn Fn(&mut Tape, &ParamStore) -> Result<NodeId>>;

fn uniform(rng: &mut impl Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn weighted_sum(tape: &mut Tape, y: NodeId, r: &Tensor) -> Result<NodeId> {
    let r = tape.input(r.clone());
    let p = tape.record(Op::Binary(Binary::Mul), &[y, r])?;
    tape.record(Op::Sum(None), &[p])
}

fn activation(i: u64) -> Activation {
    [
        Activation::None,
        Activation::Sigmoid,
        Activation::Relu,
        Activation::Tanh,
    ][(i % 4) as usize]
}

fn clear_of_kink(pre: &Tensor) -> bool {
    pre.data().iter().all(|v| v.abs() >= KINK_MARGIN)
}

/// Builds one instance; `None` asks the caller to resample (relu kink).
fn instance(name: &str, seed: u64, attempt: u64) -> Option<(ParamStore, Program)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(7919).wrapping_add(attempt));
    let mut store = ParamStore::new();
    let program: Program = match name {
        "dense" => {
            let (n, i, o) = (rng.random_range(1..4), rng.random_range(1..5), rng.random_range(1..4));
            let act = activation(seed);
            store.insert("x", uniform(&mut rng, &[n, i])).unwrap();
            DenseParams::init(&mut store, "l", i, o, &mut rng).unwrap();
            store.set_value("l.bias", uniform(&mut rng, &[o])).unwrap();
            if act == Activation::Relu {
                let w = store.value("l.weight").unwrap().transpose();
                let pre = binary(
                    Binary::Add,
                    &matmul(store.value("x").unwrap(), &w).unwrap(),
                    store.value("l.bias").unwrap(),
                )
                .unwrap();
                if !clear_of_kink(&pre) {
                    return None;
                }
            }
            let r = uniform(&mut rng, &[n, o]);
            Box::new(move |tape, store| {
                let x = tape.param(store, "x")?;
                let p = DenseParams::bind(tape, store, "l")?;
                let y = dense(tape, x, &p, act)?;
                weighted_sum(tape, y, &r)
            })
        }
        "diff_branch" => {
            let n = rng.random_range(1..6);
            store
                .insert("gate", Tensor::scalar(rng.random_range(0.0..1.0)))
                .unwrap();
            store.insert("y", uniform(&mut rng, &[n])).unwrap();
            store.insert("z", uniform(&mut rng, &[n])).unwrap();
            let r = uniform(&mut rng, &[n]);
            Box::new(move |tape, store| {
                let g = tape.param(store, "gate")?;
                let y = tape.param(store, "y")?;
                let z = tape.param(store, "z")?;
                let out = diff_branch(tape, g, y, z)?;
                weighted_sum(tape, out, &r)
            })
        }
        "self_attention" => {
            let (n, d) = (rng.random_range(1..5), rng.random_range(1..5));
            let mut mask = Mask::empty(n, n);
            for row in 0..n {
                for col in 0..n {
                    mask.set(row, col, rng.random::<f64>() < 0.6);
                }
                if mask.row_count(row) == 0 {
                    mask.set(row, rng.random_range(0..n), true);
                }
            }
            let pattern = Arc::new(AttentionPattern::from_mask(&mask).unwrap());
            store.insert("x", uniform(&mut rng, &[n, d])).unwrap();
            AttentionParams::init(&mut store, "att", d, &mut rng).unwrap();
            let r = uniform(&mut rng, &[n, d]);
            Box::new(move |tape, store| {
                let x = tape.param(store, "x")?;
                let p = AttentionParams::bind(tape, store, "att")?;
                let y = self_attention(tape, x, &pattern, &p)?;
                weighted_sum(tape, y, &r)
            })
        }
        "gcn_layer" => {
            let n = rng.random_range(2..7);
            let (i, o) = (rng.random_range(1..5), rng.random_range(1..4));
            let mut pairs = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if rng.random::<f64>() < 0.5 {
                        pairs.push((a, b));
                    }
                }
            }
            let edges = pairs.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
            let g = diffprog_core::graph::CitationGraph::new(
                1,
                edges,
                SparseMatrix::identity(n),
                vec![0; n],
                Default::default(),
            )
            .unwrap();
            let a_hat = Arc::new(normalize_adjacency(&g, true));
            let act = activation(seed);
            store.insert("x", uniform(&mut rng, &[n, i])).unwrap();
            GcnParams::init(&mut store, "g", i, o, &mut rng).unwrap();
            store.set_value("g.bias", uniform(&mut rng, &[o])).unwrap();
            if act == Activation::Relu {
                let xw = matmul(store.value("x").unwrap(), store.value("g.weight").unwrap()).unwrap();
                let pre = binary(Binary::Add, &spmm(&a_hat, &xw).unwrap(), store.value("g.bias").unwrap()).unwrap();
                if !clear_of_kink(&pre) {
                    return None;
                }
            }
            let r = uniform(&mut rng, &[n, o]);
            Box::new(move |tape, store| {
                let x = tape.param(store, "x")?;
                let p = GcnParams::bind(tape, store, "g")?;
                let y = gcn_layer(tape, x, &a_hat, &p, act)?;
                weighted_sum(tape, y, &r)
            })
        }
        "rnn_cell" => {
            let (i, h, steps) = (rng.random_range(1..4), rng.random_range(1..4), 3);
            RnnParams::init(&mut store, "rnn", i, h, &mut rng).unwrap();
            store.set_value("rnn.bias", uniform(&mut rng, &[h])).unwrap();
            store.insert("h0", uniform(&mut rng, &[h])).unwrap();
            for t in 0..steps {
                store.insert(format!("x{t}"), uniform(&mut rng, &[i])).unwrap();
            }
            let r = uniform(&mut rng, &[h]);
            Box::new(move |tape, store| {
                let p = RnnParams::bind(tape, store, "rnn")?;
                let mut state = tape.param(store, "h0")?;
                for t in 0..steps {
                    let x = tape.param(store, &format!("x{t}"))?;
                    state = rnn_cell(tape, state, x, &p)?;
                }
                weighted_sum(tape, state, &r)
            })
        }
        "dropout_inference" | "dropout_training" => {
            let training = name == "dropout_training";
            let n = rng.random_range(1..20);
            let p_drop = rng.random_range(0.0..0.9);
            let mask_seed = rng.random();
            store.insert("x", uniform(&mut rng, &[n])).unwrap();
            let r = uniform(&mut rng, &[n]);
            Box::new(move |tape, store| {
                let x = tape.param(store, "x")?;
                let t = tape.record(Op::Unary(diffprog_core::tensor::Unary::Tanh), &[x])?;
                let y = dropout(tape, t, p_drop, training, mask_seed)?;
                weighted_sum(tape, y, &r)
            })
        }
        "cross_entropy" => {
            let (n, c) = (rng.random_range(1..6), rng.random_range(2..6));
            let mut logits = uniform(&mut rng, &[n, c]);
            logits = diffprog_core::tensor::scale(&logits, 3.0);
            store.insert("logits", logits).unwrap();
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
            let mut rows: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < 0.6).collect();
            if rows.is_empty() {
                rows.push(rng.random_range(0..n));
            }
            Box::new(move |tape, store| {
                let l = tape.param(store, "logits")?;
                cross_entropy(tape, l, &labels, &rows)
            })
        }
        other => panic!("unknown primitive {other}"),
    };
    Some((store, program))
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteOutcome {
    pub instances: usize,
    pub max_rel_error: f64,
    pub worst_seed: u64,
    pub resampled: usize,
}

/// Runs `instances` seeded gradient checks of one primitive.
pub fn run(name: &str, instances: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome {
        instances: 0,
        max_rel_error: 0.0,
        worst_seed: 0,
        resampled: 0,
    };
    for seed in 0..instances {
        let (store, program) = (0..)
            .find_map(|attempt| {
                let inst = instance(name, seed, attempt);
                if inst.is_none() {
                    out.resampled += 1;
                }
                inst
            })
            .unwrap();
        let report = gradient_check(program, &store, STEP).unwrap();
        out.instances += 1;
        if report.max_rel_error >= out.max_rel_error {
            out.max_rel_error = report.max_rel_error;
            out.worst_seed = seed;
        }
    }
    out
}
