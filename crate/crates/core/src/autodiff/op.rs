//! Primitive node kinds with their forward kernels and closed-form local
//! derivatives.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::primitives::attention::{self, AttentionPattern};
use crate::sparse::{spmm, spmm_transposed, SparseMatrix};
use crate::tensor::{
    self, as_left, as_right, binary, is_bias_broadcast, matmul_nt, matmul_tn, reduce_sum, softmax_rows, unary, Binary,
    Mask, Tensor, TensorError, Unary,
};

/// What a tape node computes.
#[derive(Clone, Debug)]
pub enum Op {
    /// External input (leaf).
    Input,
    /// Trainable parameter registered from a `ParamStore` (leaf).
    Parameter(String),
    MatMul,
    /// Constant sparse left operand times the input.
    SpMM(Arc<SparseMatrix>),
    Binary(Binary),
    Scale(f64),
    Unary(Unary),
    Sum(Option<usize>),
    Softmax(Option<Arc<Mask>>),
    Transpose,
    /// Row `i` of a matrix as a vector.
    Row(usize),
    /// Vectors stacked as the rows of a matrix.
    Stack,
    /// `gate · y + (1 − gate) · z`.
    Branch,
    /// Masked scaled dot-product attention over `(q, k, v)`.
    Attention {
        pattern: Arc<AttentionPattern>,
        scale: f64,
    },
    /// Multiplication by a fixed per-element factor (0 or 1/(1−p)).
    Dropout(Arc<Vec<f64>>),
    /// Mean softmax cross-entropy over the selected rows.
    CrossEntropy {
        labels: Arc<Vec<usize>>,
        rows: Arc<Vec<usize>>,
    },
}

/// Every kind name, as used in tape dumps.
pub const KIND_NAMES: &[&str] = &[
    "input",
    "parameter",
    "matmul",
    "spmm",
    "add",
    "sub",
    "mul",
    "scale",
    "sigmoid",
    "tanh",
    "relu",
    "exp",
    "log",
    "sum",
    "softmax",
    "transpose",
    "row",
    "stack",
    "branch",
    "attention",
    "dropout",
    "cross_entropy",
];

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Parameter(_) => "parameter",
            Op::MatMul => "matmul",
            Op::SpMM(_) => "spmm",
            Op::Binary(b) => b.name(),
            Op::Scale(_) => "scale",
            Op::Unary(u) => u.name(),
            Op::Sum(_) => "sum",
            Op::Softmax(_) => "softmax",
            Op::Transpose => "transpose",
            Op::Row(_) => "row",
            Op::Stack => "stack",
            Op::Branch => "branch",
            Op::Attention { .. } => "attention",
            Op::Dropout(_) => "dropout",
            Op::CrossEntropy { .. } => "cross_entropy",
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Op::Input | Op::Parameter(_))
    }

    fn arity(&self) -> Option<usize> {
        match self {
            Op::Input | Op::Parameter(_) => Some(0),
            Op::MatMul | Op::Binary(_) => Some(2),
            Op::Branch | Op::Attention { .. } => Some(3),
            Op::Stack => None,
            _ => Some(1),
        }
    }

    /// Computes the node value and any auxiliary buffer backward needs.
    pub(crate) fn forward(&self, inputs: &[&Tensor]) -> Result<(Tensor, Vec<f64>)> {
        if let Some(expected) = self.arity() {
            if inputs.len() != expected {
                return Err(Error::Arity {
                    kind: self.name(),
                    expected,
                    got: inputs.len(),
                });
            }
        } else if inputs.is_empty() {
            return Err(Error::Arity {
                kind: self.name(),
                expected: 1,
                got: 0,
            });
        }
        let plain =
            |t: std::result::Result<Tensor, TensorError>| -> Result<(Tensor, Vec<f64>)> { Ok((t?, Vec::new())) };
        match self {
            Op::Input | Op::Parameter(_) => Err(Error::LeafKind(self.name())),
            Op::MatMul => plain(tensor::matmul(inputs[0], inputs[1])),
            Op::SpMM(a) => plain(spmm(a, inputs[0])),
            Op::Binary(b) => plain(binary(*b, inputs[0], inputs[1])),
            Op::Scale(f) => plain(Ok(tensor::scale(inputs[0], *f))),
            Op::Unary(u) => plain(unary(*u, inputs[0])),
            Op::Sum(axis) => plain(reduce_sum(inputs[0], *axis)),
            Op::Softmax(mask) => plain(softmax_rows(inputs[0], mask.as_deref())),
            Op::Transpose => plain(Ok(inputs[0].transpose())),
            Op::Row(i) => {
                let x = inputs[0];
                if x.rank() != 2 || *i >= x.rows() {
                    return Err(TensorError::ShapeMismatch {
                        op: "row",
                        lhs: x.shape().to_vec(),
                        rhs: vec![*i],
                    }
                    .into());
                }
                plain(Ok(Tensor::vector(x.row(*i).to_vec())))
            }
            Op::Stack => {
                let n = inputs[0].len();
                let mut data = Vec::with_capacity(n * inputs.len());
                for t in inputs {
                    if t.rank() != 1 || t.len() != n {
                        return Err(TensorError::ShapeMismatch {
                            op: "stack",
                            lhs: inputs[0].shape().to_vec(),
                            rhs: t.shape().to_vec(),
                        }
                        .into());
                    }
                    data.extend_from_slice(t.data());
                }
                plain(Tensor::matrix(inputs.len(), n, data))
            }
            Op::Branch => {
                let (gate, y, z) = (inputs[0], inputs[1], inputs[2]);
                let a = gate.item().ok_or_else(|| Error::GateNotScalar(gate.shape().to_vec()))?;
                if y.shape() != z.shape() {
                    return Err(TensorError::ShapeMismatch {
                        op: "branch",
                        lhs: y.shape().to_vec(),
                        rhs: z.shape().to_vec(),
                    }
                    .into());
                }
                let data = y
                    .data()
                    .iter()
                    .zip(z.data())
                    .map(|(&yv, &zv)| a * yv + (1.0 - a) * zv)
                    .collect();
                plain(Tensor::new(y.shape(), data))
            }
            Op::Attention { pattern, scale } => attention::forward(inputs[0], inputs[1], inputs[2], pattern, *scale),
            Op::Dropout(factors) => {
                let x = inputs[0];
                if factors.len() != x.len() {
                    return Err(TensorError::DataLength {
                        shape: x.shape().to_vec(),
                        len: factors.len(),
                    }
                    .into());
                }
                let data = x.data().iter().zip(factors.iter()).map(|(a, f)| a * f).collect();
                plain(Tensor::new(x.shape(), data))
            }
            Op::CrossEntropy { labels, rows } => cross_entropy_forward(inputs[0], labels, rows),
        }
    }

    /// Contribution of `grad` (the adjoint of this node) to each input.
    pub(crate) fn backward(
        &self,
        inputs: &[&Tensor],
        value: &Tensor,
        aux: &[f64],
        grad: &Tensor,
    ) -> Result<Vec<Tensor>> {
        let g = grad.data();
        let shaped = |like: &Tensor, data: Vec<f64>| Tensor::new(like.shape(), data);
        let out = match self {
            Op::Input | Op::Parameter(_) => Vec::new(),
            Op::MatMul => {
                let (a, b) = (inputs[0], inputs[1]);
                let (m, k) = as_left(a);
                let (_, n) = as_right(b);
                vec![
                    shaped(a, matmul_nt(g, b.data(), m, n, k))?,
                    shaped(b, matmul_tn(a.data(), g, m, k, n))?,
                ]
            }
            Op::SpMM(a) => {
                let gm = grad.reshape(&match inputs[0].rank() {
                    1 => vec![a.rows()],
                    _ => vec![a.rows(), inputs[0].cols()],
                })?;
                vec![spmm_transposed(a, &gm)?]
            }
            Op::Binary(op) => {
                let (a, b) = (inputs[0], inputs[1]);
                let broadcast = a.shape() != b.shape() && is_bias_broadcast(a, b);
                let n = b.len();
                let b_at = |i: usize| if broadcast { b.data()[i % n] } else { b.data()[i] };
                let (ga, gb_full): (Vec<f64>, Vec<f64>) = match op {
                    Binary::Add => (g.to_vec(), g.to_vec()),
                    Binary::Sub => (g.to_vec(), g.iter().map(|x| -x).collect()),
                    Binary::Mul => (
                        g.iter().enumerate().map(|(i, x)| x * b_at(i)).collect(),
                        g.iter().zip(a.data()).map(|(x, av)| x * av).collect(),
                    ),
                };
                let gb = if broadcast {
                    reduce_sum(&shaped(a, gb_full)?, Some(0))?
                } else {
                    shaped(b, gb_full)?
                };
                vec![shaped(a, ga)?, gb]
            }
            Op::Scale(f) => vec![tensor::scale(grad, *f)],
            Op::Unary(u) => {
                let x = inputs[0];
                let data: Vec<f64> = match u {
                    Unary::Sigmoid => zip3(g, value.data(), |gi, y| gi * y * (1.0 - y)),
                    Unary::Tanh => zip3(g, value.data(), |gi, y| gi * (1.0 - y * y)),
                    Unary::Relu => zip3(g, x.data(), |gi, xv| if xv > 0.0 { gi } else { 0.0 }),
                    Unary::Exp => zip3(g, value.data(), |gi, y| gi * y),
                    Unary::Log => zip3(g, x.data(), |gi, xv| gi / xv),
                };
                vec![shaped(x, data)?]
            }
            Op::Sum(axis) => {
                let x = inputs[0];
                let data = match (axis, x.shape()) {
                    (None, _) | (Some(0), [_]) => vec![g[0]; x.len()],
                    (Some(0), [_, c]) => (0..x.len()).map(|i| g[i % c]).collect(),
                    (Some(1), [_, c]) => (0..x.len()).map(|i| g[i / c]).collect(),
                    _ => unreachable!("axis validated in forward"),
                };
                vec![shaped(x, data)?]
            }
            Op::Softmax(_) => {
                let (rows, cols) = (value.rows(), value.cols());
                let y = value.data();
                let mut data = vec![0.0; rows * cols];
                for r in 0..rows {
                    let span = r * cols..(r + 1) * cols;
                    let inner = tensor::dot(&g[span.clone()], &y[span.clone()]);
                    for i in span {
                        data[i] = y[i] * (g[i] - inner);
                    }
                }
                vec![shaped(value, data)?]
            }
            Op::Transpose => {
                let t = grad.transpose();
                vec![t.reshape(inputs[0].shape())?]
            }
            Op::Row(i) => {
                let x = inputs[0];
                let c = x.cols();
                let mut data = vec![0.0; x.len()];
                data[i * c..(i + 1) * c].copy_from_slice(g);
                vec![shaped(x, data)?]
            }
            Op::Stack => {
                let n = inputs[0].len();
                (0..inputs.len())
                    .map(|r| Tensor::vector(g[r * n..(r + 1) * n].to_vec()))
                    .collect()
            }
            Op::Branch => {
                let (gate, y, z) = (inputs[0], inputs[1], inputs[2]);
                let a = gate.data()[0];
                let dgate: f64 = g
                    .iter()
                    .zip(y.data().iter().zip(z.data()))
                    .map(|(gi, (yv, zv))| gi * (yv - zv))
                    .sum();
                vec![
                    Tensor::new(gate.shape(), vec![dgate])?,
                    tensor::scale(grad, a),
                    tensor::scale(grad, 1.0 - a),
                ]
            }
            Op::Attention { pattern, scale } => {
                let (dq, dk, dv) = attention::backward(inputs[0], inputs[1], inputs[2], pattern, *scale, aux, grad)?;
                vec![dq, dk, dv]
            }
            Op::Dropout(factors) => {
                vec![shaped(grad, zip3(g, factors, |gi, f| gi * f))?]
            }
            Op::CrossEntropy { labels, rows } => {
                let logits = inputs[0];
                let c = logits.cols();
                let scale = g[0] / rows.len() as f64;
                let mut data = vec![0.0; logits.len()];
                for (j, &r) in rows.iter().enumerate() {
                    let probs = &aux[j * c..(j + 1) * c];
                    let out = &mut data[r * c..(r + 1) * c];
                    for (k, (o, p)) in out.iter_mut().zip(probs).enumerate() {
                        let target = if k == labels[r] { 1.0 } else { 0.0 };
                        *o += scale * (p - target);
                    }
                }
                vec![shaped(logits, data)?]
            }
        };
        Ok(out)
    }
}

fn zip3(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn cross_entropy_forward(logits: &Tensor, labels: &[usize], rows: &[usize]) -> Result<(Tensor, Vec<f64>)> {
    if logits.rank() != 2 || labels.len() != logits.rows() {
        return Err(TensorError::ShapeMismatch {
            op: "cross_entropy",
            lhs: logits.shape().to_vec(),
            rhs: vec![labels.len()],
        }
        .into());
    }
    if rows.is_empty() {
        return Err(Error::EmptyMask);
    }
    let c = logits.cols();
    let mut probs = Vec::with_capacity(rows.len() * c);
    let mut total = 0.0;
    for &r in rows {
        if r >= logits.rows() {
            return Err(Error::UnknownNode {
                id: r,
                len: logits.rows(),
            });
        }
        let label = labels[r];
        if label >= c {
            return Err(Error::LabelOutOfRange {
                node: r,
                label,
                classes: c,
            });
        }
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row.iter().map(|x| (x - max).exp()).sum();
        let lse = max + sum_exp.ln();
        total += lse - row[label];
        probs.extend(row.iter().map(|x| (x - lse).exp()));
    }
    Ok((Tensor::scalar(total / rows.len() as f64), probs))
}
