//! Differentiable building blocks recorded on a [`Tape`]: dense layers,
//! differentiable branching, self-attention, graph convolution, a recurrent
//! cell, dropout and the classification loss.
//!
//! Parameters live in a [`ParamStore`] under dotted names
//! (`"<prefix>.weight"`, `"<prefix>.bias"`). Each `*Params::init` creates them
//! once; each `*Params::bind` registers them as parameter nodes on a fresh
//! tape.

pub mod attention;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{NodeId, Op, ParamStore, Tape};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;
use crate::tensor::{Binary, Tensor, TensorError, Unary};

pub use attention::{self_attention, self_attention_with_weights, AttentionParams, AttentionPattern};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    None,
    Sigmoid,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, tape: &mut Tape, x: NodeId) -> Result<NodeId> {
        let op = match self {
            Activation::None => return Ok(x),
            Activation::Sigmoid => Unary::Sigmoid,
            Activation::Relu => Unary::Relu,
            Activation::Tanh => Unary::Tanh,
        };
        tape.record(Op::Unary(op), &[x])
    }
}

/// Left operand of a layer: a tape node, or a constant sparse matrix such as
/// a bag-of-words feature table that is never differentiated.
#[derive(Clone, Debug)]
pub enum LayerInput {
    Node(NodeId),
    Sparse(Arc<SparseMatrix>),
}

impl From<NodeId> for LayerInput {
    fn from(id: NodeId) -> Self {
        LayerInput::Node(id)
    }
}

impl From<&Arc<SparseMatrix>> for LayerInput {
    fn from(m: &Arc<SparseMatrix>) -> Self {
        LayerInput::Sparse(Arc::clone(m))
    }
}

/// `x · w` where `w` is a `[in, out]` node.
fn project(tape: &mut Tape, x: LayerInput, w: NodeId) -> Result<NodeId> {
    match x {
        LayerInput::Node(x) => tape.record(Op::MatMul, &[x, w]),
        LayerInput::Sparse(m) => tape.record(Op::SpMM(m), &[w]),
    }
}

/// Uniform Glorot initialization: `U(−a, a)` with `a = √(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(shape, data).expect("length matches shape")
}

fn weight_name(prefix: &str) -> String {
    format!("{prefix}.weight")
}

fn bias_name(prefix: &str) -> String {
    format!("{prefix}.bias")
}

/// Affine layer `x · Wᵀ + b` with `W: [out, in]` and `b: [out]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DenseParams {
    pub weight: NodeId,
    pub bias: NodeId,
}

impl DenseParams {
    pub fn init(store: &mut ParamStore, prefix: &str, inputs: usize, outputs: usize, rng: &mut impl Rng) -> Result<()> {
        store.insert(
            weight_name(prefix),
            glorot_uniform(&[outputs, inputs], inputs, outputs, rng),
        )?;
        store.insert(bias_name(prefix), Tensor::zeros(&[outputs]))
    }

    pub fn bind(tape: &mut Tape, store: &ParamStore, prefix: &str) -> Result<Self> {
        Ok(Self {
            weight: tape.param(store, &weight_name(prefix))?,
            bias: tape.param(store, &bias_name(prefix))?,
        })
    }
}

/// Records `activation(x · Wᵀ + b)`. `x` is `[n, in]` or `[in]`; the result
/// is `[n, out]` or `[out]`.
pub fn dense(tape: &mut Tape, x: impl Into<LayerInput>, p: &DenseParams, activation: Activation) -> Result<NodeId> {
    let wt = tape.record(Op::Transpose, &[p.weight])?;
    let h = project(tape, x.into(), wt)?;
    let z = tape.record(Op::Binary(Binary::Add), &[h, p.bias])?;
    activation.apply(tape, z)
}

/// Records the convex combination `gate · y + (1 − gate) · z`.
pub fn diff_branch(tape: &mut Tape, gate: NodeId, y: NodeId, z: NodeId) -> Result<NodeId> {
    tape.record(Op::Branch, &[gate, y, z])
}

/// Graph convolution weights, `W: [in, out]` and `b: [out]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GcnParams {
    pub weight: NodeId,
    pub bias: NodeId,
}

impl GcnParams {
    pub fn init(store: &mut ParamStore, prefix: &str, inputs: usize, outputs: usize, rng: &mut impl Rng) -> Result<()> {
        store.insert(
            weight_name(prefix),
            glorot_uniform(&[inputs, outputs], inputs, outputs, rng),
        )?;
        store.insert(bias_name(prefix), Tensor::zeros(&[outputs]))
    }

    pub fn bind(tape: &mut Tape, store: &ParamStore, prefix: &str) -> Result<Self> {
        Ok(Self {
            weight: tape.param(store, &weight_name(prefix))?,
            bias: tape.param(store, &bias_name(prefix))?,
        })
    }
}

/// Records `activation(Â · (X · W) + b)`: each node sums the normalized
/// messages `X_j W` of its neighbors (including itself when `Â` carries
/// self-loops), then applies the shared affine map and activation.
pub fn gcn_layer(
    tape: &mut Tape,
    x: impl Into<LayerInput>,
    a_hat: &Arc<SparseMatrix>,
    p: &GcnParams,
    activation: Activation,
) -> Result<NodeId> {
    let h = project(tape, x.into(), p.weight)?;
    let rows = tape.value(h)?.rows();
    if a_hat.rows() != a_hat.cols() || a_hat.cols() != rows {
        return Err(TensorError::ShapeMismatch {
            op: "gcn_layer",
            lhs: a_hat.shape().to_vec(),
            rhs: tape.value(h)?.shape().to_vec(),
        }
        .into());
    }
    let agg = tape.record(Op::SpMM(Arc::clone(a_hat)), &[h])?;
    let z = tape.record(Op::Binary(Binary::Add), &[agg, p.bias])?;
    activation.apply(tape, z)
}

/// Elman cell weights: `Wxh: [h, in]`, `Whh: [h, h]`, `bh: [h]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RnnParams {
    pub input_weight: NodeId,
    pub hidden_weight: NodeId,
    pub bias: NodeId,
}

impl RnnParams {
    pub fn init(store: &mut ParamStore, prefix: &str, inputs: usize, hidden: usize, rng: &mut impl Rng) -> Result<()> {
        store.insert(
            format!("{prefix}.input_weight"),
            glorot_uniform(&[hidden, inputs], inputs, hidden, rng),
        )?;
        store.insert(
            format!("{prefix}.hidden_weight"),
            glorot_uniform(&[hidden, hidden], hidden, hidden, rng),
        )?;
        store.insert(bias_name(prefix), Tensor::zeros(&[hidden]))
    }

    pub fn bind(tape: &mut Tape, store: &ParamStore, prefix: &str) -> Result<Self> {
        Ok(Self {
            input_weight: tape.param(store, &format!("{prefix}.input_weight"))?,
            hidden_weight: tape.param(store, &format!("{prefix}.hidden_weight"))?,
            bias: tape.param(store, &bias_name(prefix))?,
        })
    }
}

/// Records `tanh(Wxh · x_t + Whh · h_prev + bh)`.
pub fn rnn_cell(tape: &mut Tape, h_prev: NodeId, x_t: NodeId, p: &RnnParams) -> Result<NodeId> {
    let from_input = tape.record(Op::MatMul, &[p.input_weight, x_t])?;
    let from_state = tape.record(Op::MatMul, &[p.hidden_weight, h_prev])?;
    let s = tape.record(Op::Binary(Binary::Add), &[from_input, from_state])?;
    let s = tape.record(Op::Binary(Binary::Add), &[s, p.bias])?;
    tape.record(Op::Unary(Unary::Tanh), &[s])
}

/// Inverted dropout. In training mode each entry is zeroed with probability
/// `p_drop` and survivors are scaled by `1 / (1 − p_drop)`; the keep mask is
/// drawn from `seed` and stored on the node for backward. Otherwise (or with
/// `p_drop == 0`) `x` is returned unchanged.
pub fn dropout(tape: &mut Tape, x: NodeId, p_drop: f64, training: bool, seed: u64) -> Result<NodeId> {
    if !(0.0..1.0).contains(&p_drop) {
        return Err(Error::InvalidProbability(p_drop));
    }
    if !training || p_drop == 0.0 {
        tape.value(x)?;
        return Ok(x);
    }
    let n = tape.value(x)?.len();
    let keep_scale = 1.0 / (1.0 - p_drop);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors = (0..n)
        .map(|_| if rng.random::<f64>() < p_drop { 0.0 } else { keep_scale })
        .collect();
    tape.record(Op::Dropout(Arc::new(factors)), &[x])
}

/// Mean over `rows` of `−log softmax(logits[r])[labels[r]]`, with
/// log-sum-exp stabilization. `labels` covers every row of `logits`.
pub fn cross_entropy(tape: &mut Tape, logits: NodeId, labels: &[usize], rows: &[usize]) -> Result<NodeId> {
    tape.record(
        Op::CrossEntropy {
            labels: Arc::new(labels.to_vec()),
            rows: Arc::new(rows.to_vec()),
        },
        &[logits],
    )
}

/// Like [`cross_entropy`] but shares already-allocated label and row lists.
pub fn cross_entropy_shared(
    tape: &mut Tape,
    logits: NodeId,
    labels: &Arc<Vec<usize>>,
    rows: &Arc<Vec<usize>>,
) -> Result<NodeId> {
    tape.record(
        Op::CrossEntropy {
            labels: Arc::clone(labels),
            rows: Arc::clone(rows),
        },
        &[logits],
    )
}
