//! Dense row-major tensors of rank 0, 1 or 2 and the deterministic kernels
//! the rest of the crate builds on.
//!
//! Every kernel is a pure function of its inputs. Matrix products always sum
//! in ascending inner index, so identical inputs produce bitwise-identical
//! outputs regardless of how many threads rayon hands out.

use rayon::prelude::*;
use thiserror::Error;

/// Work threshold (multiply-adds) above which matrix kernels split rows
/// across the rayon pool.
const PAR_THRESHOLD: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("rank {0} tensors are not supported (maximum rank is 2)")]
    RankTooHigh(usize),
    #[error("axis {axis} is invalid for a rank-{rank} tensor")]
    InvalidAxis { axis: usize, rank: usize },
    #[error("log of non-positive value {value} at flat index {index}")]
    LogDomain { value: f64, index: usize },
    #[error("row {0} has no allowed entry in the mask")]
    FullyMaskedRow(usize),
    #[error("sparse entry ({row}, {col}) lies outside a {rows}x{cols} matrix")]
    SparseOutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("duplicate sparse entry ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },
}

pub type Result<T, E = TensorError> = std::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if shape.len() > 2 {
            return Err(TensorError::RankTooHigh(shape.len()));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::DataLength {
                shape: shape.to_vec(),
                len: data.len(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(&[rows, cols], data)
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(TensorError::ShapeMismatch {
                    op: "from_rows",
                    lhs: vec![cols],
                    rhs: vec![row.len()],
                });
            }
            data.extend_from_slice(row);
        }
        Self::matrix(rows.len(), cols, data)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        assert!(shape.len() <= 2, "rank {} tensors are not supported", shape.len());
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn zeros_like(other: &Tensor) -> Self {
        Self::zeros(&other.shape)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// True for a single-element tensor of rank 0, `[1]` or `[1, 1]`.
    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single value of a scalar tensor.
    pub fn item(&self) -> Option<f64> {
        self.is_scalar().then(|| self.data[0])
    }

    /// Row count of a matrix (1 for lower ranks).
    pub fn rows(&self) -> usize {
        match self.shape.as_slice() {
            [r, _] => *r,
            _ => 1,
        }
    }

    /// Column count of a matrix, length of a vector, 1 for a scalar.
    pub fn cols(&self) -> usize {
        match self.shape.as_slice() {
            [_, c] => *c,
            [n] => *n,
            _ => 1,
        }
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.cols();
        &self.data[row * c..(row + 1) * c]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        Tensor::new(shape, self.data.clone())
    }

    pub fn transpose(&self) -> Tensor {
        match self.shape.as_slice() {
            [r, c] => {
                let (r, c) = (*r, *c);
                let mut out = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        out[j * r + i] = self.data[i * c + j];
                    }
                }
                Tensor {
                    shape: vec![c, r],
                    data: out,
                }
            }
            _ => self.clone(),
        }
    }

    /// In-place `self += other` for equal shapes.
    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(mismatch("add_assign", self, other));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        lhs: a.shape.clone(),
        rhs: b.shape.clone(),
    }
}

/// Boolean `[rows, cols]` matrix selecting allowed entries (attention scope,
/// softmax support).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(TensorError::DataLength {
                shape: vec![rows, cols],
                len: bits.len(),
            });
        }
        Ok(Self { rows, cols, bits })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                bits.push(f(r, c));
            }
        }
        Self { rows, cols, bits }
    }

    pub fn full(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            bits: vec![true; n * n],
        }
    }

    pub fn diagonal(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| r == c)
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![false; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, allowed: bool) {
        self.bits[row * self.cols + col] = allowed;
    }

    pub fn row(&self, row: usize) -> &[bool] {
        &self.bits[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_count(&self, row: usize) -> usize {
        self.row(row).iter().filter(|&&b| b).count()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

/// Views a rank ≤ 2 operand as a matrix. Vectors are rows on the left of a
/// product and columns on the right.
pub(crate) fn as_left(t: &Tensor) -> (usize, usize) {
    match t.shape.as_slice() {
        [r, c] => (*r, *c),
        [n] => (1, *n),
        _ => (1, 1),
    }
}

pub(crate) fn as_right(t: &Tensor) -> (usize, usize) {
    match t.shape.as_slice() {
        [r, c] => (*r, *c),
        [n] => (*n, 1),
        _ => (1, 1),
    }
}

/// Standard matrix product. Rank-1 operands act as a row vector on the left
/// and a column vector on the right; the result drops those unit axes.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rank() == 0 || b.rank() == 0 {
        return Err(mismatch("matmul", a, b));
    }
    let (m, k) = as_left(a);
    let (k2, n) = as_right(b);
    if k != k2 {
        return Err(mismatch("matmul", a, b));
    }
    let data = matmul_nn(&a.data, &b.data, m, k, n);
    let shape = match (a.rank(), b.rank()) {
        (2, 2) => vec![m, n],
        (1, 2) => vec![n],
        (2, 1) => vec![m],
        _ => vec![],
    };
    Tensor::new(&shape, data)
}

/// `a[m,k] · b[k,n]`, i-k-j order. Zero multiplicands in `a` are skipped,
/// which leaves every sum bitwise unchanged for finite `b`.
pub(crate) fn matmul_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    if n == 0 {
        return out;
    }
    let row = |(i, out_row): (usize, &mut [f64])| {
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    };
    if m * k * n >= PAR_THRESHOLD {
        out.par_chunks_mut(n).enumerate().for_each(row);
    } else {
        out.chunks_mut(n).enumerate().for_each(row);
    }
    out
}

/// `a[m,k] · b[n,k]ᵀ` as row-by-row dot products.
pub(crate) fn matmul_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    if n == 0 {
        return out;
    }
    let row = |(i, out_row): (usize, &mut [f64])| {
        let a_row = &a[i * k..(i + 1) * k];
        for (j, o) in out_row.iter_mut().enumerate() {
            let b_row = &b[j * k..(j + 1) * k];
            *o = dot(a_row, b_row);
        }
    };
    if m * k * n >= PAR_THRESHOLD {
        out.par_chunks_mut(n).enumerate().for_each(row);
    } else {
        out.chunks_mut(n).enumerate().for_each(row);
    }
    out
}

/// `a[m,k]ᵀ · b[m,n]`, accumulated over `m` in ascending order.
pub(crate) fn matmul_tn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * n];
    if n == 0 {
        return out;
    }
    let row = |(p, out_row): (usize, &mut [f64])| {
        for i in 0..m {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let b_row = &b[i * n..(i + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    };
    if m * k * n >= PAR_THRESHOLD {
        out.par_chunks_mut(n).enumerate().for_each(row);
    } else {
        out.chunks_mut(n).enumerate().for_each(row);
    }
    out
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Unary {
    Sigmoid,
    Tanh,
    Relu,
    Exp,
    Log,
}

impl Unary {
    pub fn name(self) -> &'static str {
        match self {
            Unary::Sigmoid => "sigmoid",
            Unary::Tanh => "tanh",
            Unary::Relu => "relu",
            Unary::Exp => "exp",
            Unary::Log => "log",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Binary {
    Add,
    Sub,
    Mul,
}

impl Binary {
    pub fn name(self) -> &'static str {
        match self {
            Binary::Add => "add",
            Binary::Sub => "sub",
            Binary::Mul => "mul",
        }
    }

    fn apply(self, x: f64, y: f64) -> f64 {
        match self {
            Binary::Add => x + y,
            Binary::Sub => x - y,
            Binary::Mul => x * y,
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn unary(op: Unary, a: &Tensor) -> Result<Tensor> {
    if op == Unary::Log {
        if let Some((index, &value)) = a.data.iter().enumerate().find(|(_, &v)| v <= 0.0) {
            return Err(TensorError::LogDomain { value, index });
        }
    }
    Ok(match op {
        Unary::Sigmoid => a.map(sigmoid),
        Unary::Tanh => a.map(f64::tanh),
        Unary::Relu => a.map(|x| if x > 0.0 { x } else { 0.0 }),
        Unary::Exp => a.map(f64::exp),
        Unary::Log => a.map(f64::ln),
    })
}

/// True when `b` can be broadcast as a bias across the rows of `a`.
pub(crate) fn is_bias_broadcast(a: &Tensor, b: &Tensor) -> bool {
    matches!((a.shape.as_slice(), b.shape.as_slice()), ([_, c], [n]) if c == n)
}

/// Pointwise binary op over equal shapes, or a rank-2 `a` with a rank-1 bias
/// `b` broadcast across its rows.
pub fn binary(op: Binary, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape == b.shape {
        let data = a.data.iter().zip(&b.data).map(|(&x, &y)| op.apply(x, y)).collect();
        return Ok(Tensor {
            shape: a.shape.clone(),
            data,
        });
    }
    if is_bias_broadcast(a, b) {
        let n = b.len();
        let data = a
            .data
            .iter()
            .enumerate()
            .map(|(i, &x)| op.apply(x, b.data[i % n]))
            .collect();
        return Ok(Tensor {
            shape: a.shape.clone(),
            data,
        });
    }
    Err(mismatch(op.name(), a, b))
}

pub fn scale(a: &Tensor, factor: f64) -> Tensor {
    a.map(|x| x * factor)
}

// ---------------------------------------------------------------------------
// Reductions and softmax
// ---------------------------------------------------------------------------

/// Sums over `axis`, or over everything when `axis` is `None`.
pub fn reduce_sum(a: &Tensor, axis: Option<usize>) -> Result<Tensor> {
    match (axis, a.shape.as_slice()) {
        (None, _) => Ok(Tensor::scalar(a.sum())),
        (Some(0), [_]) => Ok(Tensor::scalar(a.sum())),
        (Some(0), [r, c]) => {
            let mut out = vec![0.0; *c];
            for i in 0..*r {
                for (o, &x) in out.iter_mut().zip(&a.data[i * c..(i + 1) * c]) {
                    *o += x;
                }
            }
            Ok(Tensor::vector(out))
        }
        (Some(1), [r, c]) => Ok(Tensor::vector(
            (0..*r).map(|i| a.data[i * c..(i + 1) * c].iter().sum()).collect(),
        )),
        (Some(axis), _) => Err(TensorError::InvalidAxis { axis, rank: a.rank() }),
    }
}

/// Stabilized softmax of `scores` in place.
pub(crate) fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        total += *s;
    }
    for s in scores.iter_mut() {
        *s /= total;
    }
}

/// Row-wise softmax with optional support mask. Masked entries are exactly 0
/// and each row is shifted by its maximum allowed score before exponentiating.
pub fn softmax_rows(a: &Tensor, mask: Option<&Mask>) -> Result<Tensor> {
    let [rows, cols] = *a.shape.as_slice() else {
        return Err(TensorError::ShapeMismatch {
            op: "softmax_rows",
            lhs: a.shape.clone(),
            rhs: vec![],
        });
    };
    if let Some(m) = mask {
        if m.rows != rows || m.cols != cols {
            return Err(TensorError::ShapeMismatch {
                op: "softmax_rows",
                lhs: a.shape.clone(),
                rhs: vec![m.rows, m.cols],
            });
        }
    }
    let mut out = vec![0.0; rows * cols];
    let mut buf = Vec::with_capacity(cols);
    for r in 0..rows {
        let row = &a.data[r * cols..(r + 1) * cols];
        let allowed = |c: usize| mask.is_none_or(|m| m.get(r, c));
        buf.clear();
        buf.extend((0..cols).filter(|&c| allowed(c)).map(|c| row[c]));
        if buf.is_empty() {
            return Err(TensorError::FullyMaskedRow(r));
        }
        softmax_in_place(&mut buf);
        let mut it = buf.iter();
        for c in 0..cols {
            if allowed(c) {
                out[r * cols + c] = *it.next().unwrap();
            }
        }
    }
    Tensor::matrix(rows, cols, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn constructor_checks_length_and_rank() {
        assert!(matches!(
            Tensor::new(&[2, 2], vec![1.0; 3]),
            Err(TensorError::DataLength { .. })
        ));
        assert_eq!(Tensor::new(&[2, 2, 2], vec![0.0; 8]), Err(TensorError::RankTooHigh(3)));
        assert_eq!(Tensor::new(&[], vec![4.0]).unwrap().item(), Some(4.0));
    }

    #[test]
    fn matmul_identity_and_arithmetic() {
        let b = m(&[&[5.0, 6.0], &[7.0, 8.0]]);
        assert_eq!(matmul(&Tensor::identity(2), &b).unwrap(), b);
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(matmul(&a, &b).unwrap(), m(&[&[19.0, 22.0], &[43.0, 50.0]]));
    }

    #[test]
    fn matmul_reports_both_shapes() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 3]);
        let err = matmul(&a, &b).unwrap_err();
        assert_eq!(
            err,
            TensorError::ShapeMismatch {
                op: "matmul",
                lhs: vec![2, 3],
                rhs: vec![2, 3]
            }
        );
        assert!(err.to_string().contains("[2, 3] vs [2, 3]"));
    }

    #[test]
    fn matmul_vector_forms() {
        let w = m(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let x = Tensor::vector(vec![1.0, -1.0]);
        assert_eq!(matmul(&w, &x).unwrap(), Tensor::vector(vec![-1.0, -1.0, -1.0]));
        let y = Tensor::vector(vec![1.0, 0.0, 2.0]);
        assert_eq!(matmul(&y, &w).unwrap(), Tensor::vector(vec![11.0, 14.0]));
        assert_eq!(matmul(&x, &x).unwrap(), Tensor::scalar(2.0));
    }

    #[test]
    fn transposed_kernels_agree_with_explicit_transpose() {
        let a = m(&[&[1.0, -2.0, 0.5], &[0.0, 3.0, 1.0]]);
        let b = m(&[&[2.0, 1.0, -1.0], &[4.0, 0.0, 2.0]]);
        let nt = matmul_nt(a.data(), b.data(), 2, 3, 2);
        assert_eq!(nt, matmul(&a, &b.transpose()).unwrap().into_data());
        let tn = matmul_tn(a.data(), b.data(), 2, 3, 3);
        assert_eq!(tn, matmul(&a.transpose(), &b).unwrap().into_data());
    }

    #[test]
    fn elementwise_examples() {
        assert_eq!(unary(Unary::Sigmoid, &Tensor::scalar(0.0)).unwrap().item(), Some(0.5));
        assert_eq!(
            unary(Unary::Relu, &Tensor::vector(vec![-1.0, 0.0, 2.0])).unwrap(),
            Tensor::vector(vec![0.0, 0.0, 2.0])
        );
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let bias = Tensor::vector(vec![10.0, 20.0]);
        assert_eq!(
            binary(Binary::Add, &a, &bias).unwrap(),
            m(&[&[11.0, 22.0], &[13.0, 24.0]])
        );
    }

    #[test]
    fn elementwise_rejects_bad_shapes_and_log_domain() {
        let a = Tensor::zeros(&[2, 2]);
        assert!(binary(Binary::Mul, &a, &Tensor::zeros(&[3])).is_err());
        // only a rank-1 bias on the right broadcasts
        assert!(binary(Binary::Add, &Tensor::zeros(&[2]), &a).is_err());
        let err = unary(Unary::Log, &Tensor::vector(vec![1.0, 0.0])).unwrap_err();
        assert_eq!(err, TensorError::LogDomain { value: 0.0, index: 1 });
    }

    #[test]
    fn sigmoid_is_stable_in_both_tails() {
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reduce_sum_examples() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(reduce_sum(&a, None).unwrap(), Tensor::scalar(10.0));
        assert_eq!(reduce_sum(&a, Some(0)).unwrap(), Tensor::vector(vec![4.0, 6.0]));
        assert_eq!(reduce_sum(&a, Some(1)).unwrap(), Tensor::vector(vec![3.0, 7.0]));
        let z = Tensor::zeros(&[3, 2]);
        assert_eq!(reduce_sum(&z, Some(0)).unwrap(), Tensor::zeros(&[2]));
        assert_eq!(reduce_sum(&z, Some(1)).unwrap(), Tensor::zeros(&[3]));
        assert_eq!(reduce_sum(&z, None).unwrap(), Tensor::scalar(0.0));
        assert_eq!(
            reduce_sum(&a, Some(2)),
            Err(TensorError::InvalidAxis { axis: 2, rank: 2 })
        );
        assert!(reduce_sum(&Tensor::scalar(1.0), Some(0)).is_err());
    }

    #[test]
    fn softmax_examples() {
        let s = softmax_rows(&m(&[&[3.0, 3.0, 3.0]]), None).unwrap();
        for &p in s.data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let s = softmax_rows(&m(&[&[0.0, 3f64.ln()]]), None).unwrap();
        assert!((s.data()[0] - 0.25).abs() < 1e-15);
        assert!((s.data()[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn softmax_masking() {
        let a = m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let mask = Mask::from_fn(2, 3, |r, c| c != r);
        let s = softmax_rows(&a, Some(&mask)).unwrap();
        assert_eq!(s.at(0, 0), 0.0);
        assert_eq!(s.at(1, 1), 0.0);
        for r in 0..2 {
            assert!((s.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let mut blocked = Mask::full(3);
        for c in 0..3 {
            blocked.set(1, c, false);
        }
        let sq = Tensor::zeros(&[3, 3]);
        assert_eq!(softmax_rows(&sq, Some(&blocked)), Err(TensorError::FullyMaskedRow(1)));
    }
}
