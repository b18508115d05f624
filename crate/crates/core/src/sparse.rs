//! Coordinate-list sparse matrices and sparse × dense products.

use rayon::prelude::*;

use crate::tensor::{Result, Tensor, TensorError};

/// A sparse `rows × cols` matrix. Entries are kept in canonical row-major
/// order (sorted by row, then column) with no duplicate coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
    /// `row_ptr[r]..row_ptr[r + 1]` indexes the entries of row `r`.
    row_ptr: Vec<usize>,
}

impl SparseMatrix {
    /// Validates and canonicalizes a coordinate list. Entries may arrive in
    /// any order; duplicates and out-of-range coordinates are rejected.
    pub fn new(rows: usize, cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(row, col, _) in &entries {
            if row >= rows || col >= cols {
                return Err(TensorError::SparseOutOfBounds { row, col, rows, cols });
            }
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(TensorError::DuplicateEntry {
                row: w[0].0,
                col: w[0].1,
            });
        }
        let mut row_ptr = vec![0; rows + 1];
        for &(r, _, _) in &entries {
            row_ptr[r + 1] += 1;
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            rows,
            cols,
            entries,
            row_ptr,
        })
    }

    /// Like [`SparseMatrix::new`] but sums duplicate coordinates.
    pub fn from_summed(rows: usize, cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match merged.last_mut() {
                Some(last) if (last.0, last.1) == (r, c) => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        Self::new(rows, cols, merged)
    }

    pub fn identity(n: usize) -> Self {
        Self::new(n, n, (0..n).map(|i| (i, i, 1.0)).collect()).expect("identity is valid")
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, Vec::new()).expect("empty matrix is valid")
    }

    /// Keeps the nonzero entries of a dense matrix.
    pub fn from_dense(t: &Tensor) -> Result<Self> {
        let [rows, cols] = *t.shape() else {
            return Err(TensorError::ShapeMismatch {
                op: "from_dense",
                lhs: t.shape().to_vec(),
                rhs: vec![],
            });
        };
        let entries = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .filter_map(|(r, c)| {
                let v = t.at(r, c);
                (v != 0.0).then_some((r, c, v))
            })
            .collect();
        Self::new(rows, cols, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Entries of one row as `(col, value)` pairs in ascending column order.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries[self.row_ptr[r]..self.row_ptr[r + 1]]
            .iter()
            .map(|&(_, c, v)| (c, v))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn to_dense(&self) -> Tensor {
        let mut data = vec![0.0; self.rows * self.cols];
        for &(r, c, v) in &self.entries {
            data[r * self.cols + c] = v;
        }
        Tensor::matrix(self.rows, self.cols, data).expect("consistent dims")
    }

    pub fn transpose(&self) -> SparseMatrix {
        let entries = self.entries.iter().map(|&(r, c, v)| (c, r, v)).collect();
        SparseMatrix::new(self.cols, self.rows, entries).expect("transpose of a valid matrix")
    }

    /// Submatrix on the given row and column index lists (in the given order).
    pub fn select(&self, row_ids: &[usize], col_ids: &[usize]) -> SparseMatrix {
        let mut col_pos = vec![usize::MAX; self.cols];
        for (j, &c) in col_ids.iter().enumerate() {
            col_pos[c] = j;
        }
        let mut entries = Vec::new();
        for (i, &r) in row_ids.iter().enumerate() {
            for (c, v) in self.row(r) {
                if col_pos[c] != usize::MAX {
                    entries.push((i, col_pos[c], v));
                }
            }
        }
        SparseMatrix::new(row_ids.len(), col_ids.len(), entries).expect("selection stays in bounds")
    }
}

/// `a · b` for a sparse `a[m,k]` and dense `b[k,n]` (or `b[k]`, giving `[m]`).
///
/// Each output row accumulates its entries in ascending column order, which
/// reproduces the dense product bitwise.
pub fn spmm(a: &SparseMatrix, b: &Tensor) -> Result<Tensor> {
    let (k, n) = match b.shape() {
        [k, n] => (*k, *n),
        [k] => (*k, 1),
        _ => (0, 0),
    };
    if b.rank() == 0 || k != a.cols {
        return Err(TensorError::ShapeMismatch {
            op: "spmm",
            lhs: vec![a.rows, a.cols],
            rhs: b.shape().to_vec(),
        });
    }
    let bd = b.data();
    let mut out = vec![0.0; a.rows * n];
    if n > 0 {
        let row = |(r, out_row): (usize, &mut [f64])| {
            for (c, v) in a.row(r) {
                for (o, &bv) in out_row.iter_mut().zip(&bd[c * n..(c + 1) * n]) {
                    *o += v * bv;
                }
            }
        };
        if a.nnz() * n >= 1 << 16 {
            out.par_chunks_mut(n).enumerate().for_each(row);
        } else {
            out.chunks_mut(n).enumerate().for_each(row);
        }
    }
    if b.rank() == 1 {
        Ok(Tensor::vector(out))
    } else {
        Tensor::matrix(a.rows, n, out)
    }
}

/// `aᵀ · g` for a sparse `a[m,k]` and dense `g[m,n]` (or `g[m]`), without
/// materializing the transpose. Rows of `g` are scattered in ascending order.
pub fn spmm_transposed(a: &SparseMatrix, g: &Tensor) -> Result<Tensor> {
    let (m, n) = match g.shape() {
        [m, n] => (*m, *n),
        [m] => (*m, 1),
        _ => (0, 0),
    };
    if g.rank() == 0 || m != a.rows {
        return Err(TensorError::ShapeMismatch {
            op: "spmm_transposed",
            lhs: vec![a.rows, a.cols],
            rhs: g.shape().to_vec(),
        });
    }
    let gd = g.data();
    let mut out = vec![0.0; a.cols * n];
    for &(r, c, v) in &a.entries {
        for (o, &gv) in out[c * n..(c + 1) * n].iter_mut().zip(&gd[r * n..(r + 1) * n]) {
            *o += v * gv;
        }
    }
    if g.rank() == 1 {
        Ok(Tensor::vector(out))
    } else {
        Tensor::matrix(a.cols, n, out)
    }
}
