//! Masked scaled dot-product self-attention over a set of row vectors.
//!
//! Scores are only ever computed for allowed (query, key) pairs, so a
//! neighbor-restricted scope over a sparse graph costs O(edges · d) instead
//! of O(N² · d).

use std::sync::Arc;

use rayon::prelude::*;

use super::{dense, Activation, DenseParams};
use crate::autodiff::{NodeId, Op, ParamStore, Tape};
use crate::error::Result;
use crate::tensor::{dot, softmax_in_place, Mask, Tensor, TensorError};

/// Allowed key columns for every query row, compressed by row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttentionPattern {
    keys: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
}

impl AttentionPattern {
    /// Compresses a boolean scope mask. Rows without any allowed key are
    /// rejected with their index.
    pub fn from_mask(mask: &Mask) -> Result<Self, TensorError> {
        let mut row_ptr = Vec::with_capacity(mask.rows() + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for r in 0..mask.rows() {
            let before = cols.len();
            cols.extend(
                mask.row(r)
                    .iter()
                    .enumerate()
                    .filter(|(_, &b)| b)
                    .map(|(c, _)| c as u32),
            );
            if cols.len() == before {
                return Err(TensorError::FullyMaskedRow(r));
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            keys: mask.cols(),
            row_ptr,
            cols,
        })
    }

    /// Builds the pattern directly from per-row key lists (sorted, unique).
    pub fn from_rows(keys: usize, rows: &[Vec<usize>]) -> Result<Self, TensorError> {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.is_empty() {
                return Err(TensorError::FullyMaskedRow(r));
            }
            for &c in row {
                if c >= keys {
                    return Err(TensorError::SparseOutOfBounds {
                        row: r,
                        col: c,
                        rows: rows.len(),
                        cols: keys,
                    });
                }
                cols.push(c as u32);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self { keys, row_ptr, cols })
    }

    pub fn full(n: usize) -> Self {
        Self::from_mask(&Mask::full(n)).expect("full mask has no empty row")
    }

    pub fn queries(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn keys(&self) -> usize {
        self.keys
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    pub(crate) fn span(&self, r: usize) -> std::ops::Range<usize> {
        self.row_ptr[r]..self.row_ptr[r + 1]
    }

    /// Densifies per-pattern weights (as stored by an attention node).
    pub fn densify(&self, weights: &[f64]) -> Tensor {
        let mut data = vec![0.0; self.queries() * self.keys];
        for r in 0..self.queries() {
            for (&c, &w) in self.row(r).iter().zip(&weights[self.span(r)]) {
                data[r * self.keys + c as usize] = w;
            }
        }
        Tensor::matrix(self.queries(), self.keys, data).expect("consistent dims")
    }
}

fn check_shapes(q: &Tensor, k: &Tensor, v: &Tensor, p: &AttentionPattern) -> Result<(), TensorError> {
    let ok = q.rank() == 2
        && k.rank() == 2
        && v.rank() == 2
        && q.cols() == k.cols()
        && k.rows() == v.rows()
        && q.rows() == p.queries()
        && k.rows() == p.keys();
    if ok {
        Ok(())
    } else {
        Err(TensorError::ShapeMismatch {
            op: "attention",
            lhs: [q.shape(), k.shape()].concat(),
            rhs: [v.shape(), &[p.queries(), p.keys()]].concat(),
        })
    }
}

/// Returns the attended values `[N, dv]` and the attention weights in
/// pattern order.
pub(crate) fn forward(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    pattern: &AttentionPattern,
    scale: f64,
) -> Result<(Tensor, Vec<f64>)> {
    check_shapes(q, k, v, pattern)?;
    let dv = v.cols();
    let per_row: Vec<(Vec<f64>, Vec<f64>)> = (0..pattern.queries())
        .into_par_iter()
        .map(|t| {
            let qt = q.row(t);
            let mut w: Vec<f64> = pattern
                .row(t)
                .iter()
                .map(|&i| scale * dot(qt, k.row(i as usize)))
                .collect();
            softmax_in_place(&mut w);
            let mut y = vec![0.0; dv];
            for (&i, &wi) in pattern.row(t).iter().zip(&w) {
                for (o, &vv) in y.iter_mut().zip(v.row(i as usize)) {
                    *o += wi * vv;
                }
            }
            (w, y)
        })
        .collect();
    let mut weights = Vec::with_capacity(pattern.nnz());
    let mut out = Vec::with_capacity(pattern.queries() * dv);
    for (w, y) in per_row {
        weights.extend(w);
        out.extend(y);
    }
    Ok((Tensor::matrix(pattern.queries(), dv, out)?, weights))
}

pub(crate) fn backward(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    pattern: &AttentionPattern,
    scale: f64,
    weights: &[f64],
    grad: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let d = q.cols();
    let dv = v.cols();
    // d(score) per allowed pair and dQ, row-parallel
    let per_row: Vec<(Vec<f64>, Vec<f64>)> = (0..pattern.queries())
        .into_par_iter()
        .map(|t| {
            let gt = grad.row(t);
            let w = &weights[pattern.span(t)];
            let dw: Vec<f64> = pattern.row(t).iter().map(|&i| dot(gt, v.row(i as usize))).collect();
            let inner = dot(w, &dw);
            let ds: Vec<f64> = w.iter().zip(&dw).map(|(wi, dwi)| wi * (dwi - inner)).collect();
            let mut dq = vec![0.0; d];
            for (&i, &dsi) in pattern.row(t).iter().zip(&ds) {
                for (o, &kv) in dq.iter_mut().zip(k.row(i as usize)) {
                    *o += scale * dsi * kv;
                }
            }
            (ds, dq)
        })
        .collect();
    let mut dq = Vec::with_capacity(q.len());
    let mut dk = vec![0.0; k.len()];
    let mut dvals = vec![0.0; v.len()];
    for (t, (ds, dq_row)) in per_row.into_iter().enumerate() {
        dq.extend(dq_row);
        let qt = q.row(t);
        let gt = grad.row(t);
        let w = &weights[pattern.span(t)];
        for ((&i, &dsi), &wi) in pattern.row(t).iter().zip(&ds).zip(w) {
            let i = i as usize;
            for (o, &qv) in dk[i * d..(i + 1) * d].iter_mut().zip(qt) {
                *o += scale * dsi * qv;
            }
            for (o, &gv) in dvals[i * dv..(i + 1) * dv].iter_mut().zip(gt) {
                *o += wi * gv;
            }
        }
    }
    Ok((
        Tensor::new(q.shape(), dq)?,
        Tensor::new(k.shape(), dk)?,
        Tensor::new(v.shape(), dvals)?,
    ))
}

/// Query, key, value and output projections, each `d × d` with a bias.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttentionParams {
    pub query: DenseParams,
    pub key: DenseParams,
    pub value: DenseParams,
    pub output: DenseParams,
}

#[derive(Clone, Copy, Debug)]
enum Proj {
    Query,
    Key,
    Value,
    Output,
}

impl Proj {
    const ALL: [Proj; 4] = [Proj::Query, Proj::Key, Proj::Value, Proj::Output];

    fn suffix(self) -> &'static str {
        match self {
            Proj::Query => "query",
            Proj::Key => "key",
            Proj::Value => "value",
            Proj::Output => "output",
        }
    }
}

impl AttentionParams {
    pub fn init(store: &mut ParamStore, prefix: &str, d: usize, rng: &mut impl rand::Rng) -> Result<()> {
        for p in Proj::ALL {
            DenseParams::init(store, &format!("{prefix}.{}", p.suffix()), d, d, rng)?;
        }
        Ok(())
    }

    pub fn bind(tape: &mut Tape, store: &ParamStore, prefix: &str) -> Result<Self> {
        let mut bound = Proj::ALL
            .iter()
            .map(|p| DenseParams::bind(tape, store, &format!("{prefix}.{}", p.suffix())));
        Ok(Self {
            query: bound.next().unwrap()?,
            key: bound.next().unwrap()?,
            value: bound.next().unwrap()?,
            output: bound.next().unwrap()?,
        })
    }
}

/// Records `Y = softmax_scope(Q Kᵀ / √d) V` followed by the output
/// projection, where `Q`, `K`, `V` are affine projections of the rows of `x`.
/// Returns the output node and the attention node (whose weights can be read
/// back with [`Tape::attention_weights`]).
pub fn self_attention_with_weights(
    tape: &mut Tape,
    x: NodeId,
    scope: &Arc<AttentionPattern>,
    p: &AttentionParams,
) -> Result<(NodeId, NodeId)> {
    let q = dense(tape, x, &p.query, Activation::None)?;
    let k = dense(tape, x, &p.key, Activation::None)?;
    let v = dense(tape, x, &p.value, Activation::None)?;
    let d = tape.value(q)?.cols();
    let att = tape.record(
        Op::Attention {
            pattern: Arc::clone(scope),
            scale: 1.0 / (d as f64).sqrt(),
        },
        &[q, k, v],
    )?;
    let y = dense(tape, att, &p.output, Activation::None)?;
    Ok((y, att))
}

pub fn self_attention(
    tape: &mut Tape,
    x: NodeId,
    scope: &Arc<AttentionPattern>,
    p: &AttentionParams,
) -> Result<NodeId> {
    self_attention_with_weights(tape, x, scope, p).map(|(y, _)| y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_from_mask_rejects_empty_rows() {
        let mut m = Mask::full(3);
        for c in 0..3 {
            m.set(2, c, false);
        }
        assert_eq!(AttentionPattern::from_mask(&m), Err(TensorError::FullyMaskedRow(2)));
        let p = AttentionPattern::from_mask(&Mask::diagonal(3)).unwrap();
        assert_eq!(p.nnz(), 3);
        assert_eq!(p.row(1), &[1]);
    }

    #[test]
    fn densify_places_weights() {
        let p = AttentionPattern::from_rows(3, &[vec![0, 2], vec![1]]).unwrap();
        let d = p.densify(&[0.25, 0.75, 1.0]);
        assert_eq!(d.row(0), &[0.25, 0.0, 0.75]);
        assert_eq!(d.row(1), &[0.0, 1.0, 0.0]);
    }
}
