//! Compressed-row sparse matrices and the operator interface used by the
//! iterative solvers.

use rayon::prelude::*;
use thiserror::Error;

use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SparseError {
    #[error("row_offsets must have rows+1 entries (rows={rows}, got {len})")]
    BadOffsets { rows: usize, len: usize },
    #[error("row_offsets must start at 0 and be non-decreasing")]
    NonMonotoneOffsets,
    #[error("column index {col} out of bounds (cols={cols})")]
    ColOutOfBounds { col: usize, cols: usize },
    #[error("columns within row {row} are not strictly increasing")]
    UnsortedRow { row: usize },
    #[error("triplet entry ({row}, {col}) outside {rows}x{cols}")]
    TripletOutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("operand length {got} does not match {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Sparse matrix in compressed-row layout with sorted, coalesced columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from (row, col, value) triplets. Duplicate entries are coalesced
    /// by summation and columns are sorted within each row.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, SparseError> {
        for &(r, c, _) in triplets {
            if r >= rows || c >= cols {
                return Err(SparseError::TripletOutOfBounds {
                    row: r,
                    col: c,
                    rows,
                    cols,
                });
            }
        }
        let mut counts = vec![0usize; rows + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..rows {
            counts[i + 1] += counts[i];
        }
        let mut entries: Vec<(usize, f64)> = vec![(0, 0.0); triplets.len()];
        let mut cursor = counts.clone();
        for &(r, c, v) in triplets {
            entries[cursor[r]] = (c, v);
            cursor[r] += 1;
        }

        let mut row_offsets = Vec::with_capacity(rows + 1);
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_offsets.push(0);
        for r in 0..rows {
            let slice = &mut entries[counts[r]..counts[r + 1]];
            slice.sort_unstable_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < slice.len() {
                let c = slice[i].0;
                let mut v = slice[i].1;
                i += 1;
                while i < slice.len() && slice[i].0 == c {
                    v += slice[i].1;
                    i += 1;
                }
                col_indices.push(c);
                values.push(v);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Build from raw CSR parts, validating the layout invariants.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, SparseError> {
        if row_offsets.len() != rows + 1 {
            return Err(SparseError::BadOffsets {
                rows,
                len: row_offsets.len(),
            });
        }
        if row_offsets[0] != 0
            || row_offsets.windows(2).any(|w| w[0] > w[1])
            || row_offsets[rows] != col_indices.len()
            || col_indices.len() != values.len()
        {
            return Err(SparseError::NonMonotoneOffsets);
        }
        for r in 0..rows {
            let row = &col_indices[row_offsets[r]..row_offsets[r + 1]];
            for w in row.windows(2) {
                if w[0] >= w[1] {
                    return Err(SparseError::UnsortedRow { row: r });
                }
            }
            if let Some(&c) = row.last() {
                if c >= cols {
                    return Err(SparseError::ColOutOfBounds { col: c, cols });
                }
            }
        }
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Identity matrix of size n.
    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries of one row as (col, value) pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_offsets[r];
        let hi = self.row_offsets[r + 1];
        self.col_indices[lo..hi]
            .iter()
            .zip(&self.values[lo..hi])
            .map(|(&c, &v)| (c, v))
    }

    /// y = A x. Parallel over rows; each row accumulates in column order, so
    /// the result is deterministic.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, SparseError> {
        if x.len() != self.cols {
            return Err(SparseError::LengthMismatch {
                expected: self.cols,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.rows];
        if self.rows >= 512 {
            y.par_iter_mut().enumerate().for_each(|(r, out)| {
                *out = self.row_dot(r, x);
            });
        } else {
            for (r, out) in y.iter_mut().enumerate() {
                *out = self.row_dot(r, x);
            }
        }
        Ok(y)
    }

    fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        let lo = self.row_offsets[r];
        let hi = self.row_offsets[r + 1];
        let mut acc = 0.0;
        for k in lo..hi {
            acc += self.values[k] * x[self.col_indices[k]];
        }
        acc
    }

    /// x = A^T y, computed by sequential scatter over rows.
    pub fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>, SparseError> {
        if y.len() != self.rows {
            return Err(SparseError::LengthMismatch {
                expected: self.rows,
                got: y.len(),
            });
        }
        let mut x = vec![0.0; self.cols];
        for r in 0..self.rows {
            let yr = y[r];
            if yr == 0.0 {
                continue;
            }
            let lo = self.row_offsets[r];
            let hi = self.row_offsets[r + 1];
            for k in lo..hi {
                x[self.col_indices[k]] += self.values[k] * yr;
            }
        }
        Ok(x)
    }

    /// Explicit transpose in CSR layout. Worth building once when A^T is
    /// applied many times (the transpose's `apply` parallelizes over rows).
    pub fn transpose(&self) -> SparseMatrix {
        let nnz = self.nnz();
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.cols {
            counts[i + 1] += counts[i];
        }
        let mut col_indices = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut cursor = counts.clone();
        for r in 0..self.rows {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                let c = self.col_indices[k];
                let slot = cursor[c];
                col_indices[slot] = r;
                values[slot] = self.values[k];
                cursor[c] += 1;
            }
        }
        SparseMatrix {
            rows: self.cols,
            cols: self.rows,
            row_offsets: counts,
            col_indices,
            values,
        }
    }

    /// Densify (tests and small problems only).
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.cols]; self.rows];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                dense[r][c] = v;
            }
        }
        dense
    }
}

/// y_i = sum_j A_ij x_j with tensor dimension checks.
pub fn spmv(a: &SparseMatrix, x: &Tensor) -> Result<Tensor, SparseError> {
    let y = a.apply(x.data())?;
    Ok(Tensor::from_vec(vec![a.rows()], y).expect("spmv output"))
}

/// x_j = sum_i A_ij y_i with tensor dimension checks.
pub fn spmv_t(a: &SparseMatrix, y: &Tensor) -> Result<Tensor, SparseError> {
    let x = a.apply_transpose(y.data())?;
    Ok(Tensor::from_vec(vec![a.cols()], x).expect("spmv_t output"))
}

/// Anything that can act as a linear map and its adjoint. Used by LSQR and
/// the ADMM splitting blocks.
pub trait LinearOperator {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_t(&self, y: &[f64]) -> Vec<f64>;
}

impl LinearOperator for SparseMatrix {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        SparseMatrix::apply(self, x).expect("dimension checked by caller")
    }

    fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        self.apply_transpose(y).expect("dimension checked by caller")
    }
}

impl From<TensorError> for SparseError {
    fn from(_: TensorError) -> Self {
        SparseError::LengthMismatch {
            expected: 0,
            got: 0,
        }
    }
}
