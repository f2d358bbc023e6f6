//! Compressed sparse row matrices and the sparse-dense kernels used by every
//! propagation step.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

/// A real-valued CSR matrix. Column indices are strictly increasing within a
/// row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles a matrix from raw CSR arrays.
    ///
    /// Panics if the arrays are inconsistent; every caller in this crate
    /// builds them itself, so a mismatch is a bug rather than bad input.
    pub fn from_raw(nrows: usize, ncols: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(row_ptr.len(), nrows + 1, "row_ptr length");
        assert_eq!(col_idx.len(), values.len(), "col_idx/values length");
        assert_eq!(row_ptr[nrows], col_idx.len(), "row_ptr tail");
        debug_assert!(row_ptr.windows(2).all(|w| w[0] <= w[1]));
        debug_assert!((0..nrows).all(|i| {
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            cols.windows(2).all(|w| w[0] < w[1]) && cols.iter().all(|&c| c < ncols)
        }));
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Builds a CSR copy of a dense matrix, dropping exact zeros.
    pub fn from_dense(dense: ArrayView2<'_, f64>) -> Self {
        let (nrows, ncols) = dense.dim();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in dense.rows() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self::from_raw(nrows, ncols, row_ptr, col_idx, values)
    }

    /// Dense identity of size `n`.
    pub fn identity(n: usize) -> Self {
        Self::from_raw(n, n, (0..=n).collect(), (0..n).collect(), vec![1.0; n])
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.nrows, self.ncols));
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[[i, j]] = v;
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    /// Rows whose stored values sum to zero (in particular, empty rows).
    pub fn zero_rows(&self) -> Vec<usize> {
        (0..self.nrows)
            .filter(|&i| self.row(i).1.iter().all(|&v| v == 0.0))
            .collect()
    }

    /// Squared Euclidean norm of every column, length `ncols`.
    pub fn column_sq_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (&j, &v) in self.col_idx.iter().zip(&self.values) {
            out[j] += v * v;
        }
        out
    }

    /// Squared Euclidean norm of every row, length `nrows`.
    pub fn row_sq_norms(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v * v).sum())
            .collect()
    }

    /// Squared Frobenius norm.
    pub fn frob_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Scales every stored entry in row `i` by `factors[i]`.
    pub fn scale_rows(&mut self, factors: &[f64]) {
        assert_eq!(factors.len(), self.nrows);
        for (i, &f) in factors.iter().enumerate() {
            let range = self.row_ptr[i]..self.row_ptr[i + 1];
            self.values[range].iter_mut().for_each(|v| *v *= f);
        }
    }

    /// `self * dense`, shape `nrows x dense.ncols()`.
    pub fn mul_dense(&self, dense: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(dense.nrows(), self.ncols, "spmm inner dimension");
        let mut out = Array2::zeros((self.nrows, dense.ncols()));
        for (i, mut out_row) in out.axis_iter_mut(Axis(0)).enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out_row.scaled_add(v, &dense.row(j));
            }
        }
        out
    }

    /// `self^T * dense`, shape `ncols x dense.ncols()`.
    pub fn transpose_mul_dense(&self, dense: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(dense.nrows(), self.nrows, "spmm^T inner dimension");
        let mut out = Array2::zeros((self.ncols, dense.ncols()));
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let src = dense.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out.row_mut(j).scaled_add(v, &src);
            }
        }
        out
    }

    /// Rows `rows` of `self`, in order; repeated indices repeat rows.
    ///
    /// Panics on out-of-range indices; callers validate first.
    pub fn select_rows(&self, rows: &[usize]) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(|&r| self.row_ptr[r + 1] - self.row_ptr[r]).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for &r in rows {
            let (cols, vals) = self.row(r);
            col_idx.extend_from_slice(cols);
            values.extend_from_slice(vals);
            row_ptr.push(col_idx.len());
        }
        CsrMatrix::from_raw(rows.len(), self.ncols, row_ptr, col_idx, values)
    }

    /// Keeps only the columns listed in `columns` (strictly increasing),
    /// renumbering them `0..columns.len()` and multiplying column `columns[k]`
    /// by `scales[k]`.
    pub fn restrict_columns(&self, columns: &[usize], scales: &[f64]) -> CsrMatrix {
        assert_eq!(columns.len(), scales.len());
        debug_assert!(columns.windows(2).all(|w| w[0] < w[1]));
        let mut position = vec![usize::MAX; self.ncols];
        for (k, &c) in columns.iter().enumerate() {
            position[c] = k;
        }
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            // Old column order is increasing and the renumbering is monotone,
            // so the new row stays sorted.
            for (&j, &v) in cols.iter().zip(vals) {
                let k = position[j];
                if k != usize::MAX {
                    col_idx.push(k);
                    values.push(v * scales[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix::from_raw(self.nrows, columns.len(), row_ptr, col_idx, values)
    }
}

/// Squared column norms of a row-selected submatrix `QP`.
pub fn column_sq_norms(sub: &CsrMatrix) -> Vec<f64> {
    sub.column_sq_norms()
}

/// Fraction of nonzero entries in a dense matrix.
fn density(a: ArrayView2<'_, f64>) -> f64 {
    let total = a.len();
    if total == 0 {
        return 0.0;
    }
    a.iter().filter(|&&v| v != 0.0).count() as f64 / total as f64
}

const SPARSE_DENSITY: f64 = 0.3;

/// `a * b` that skips zero entries of `a` when `a` is mostly zeros
/// (bag-of-words features, rectified activations), and otherwise defers to
/// the blocked dense kernel.
pub fn matmul(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    assert_eq!(a.ncols(), b.nrows(), "matmul inner dimension");
    if density(a) >= SPARSE_DENSITY {
        return a.dot(&b);
    }
    let mut out = Array2::zeros((a.nrows(), b.ncols()));
    for (a_row, mut out_row) in a.rows().into_iter().zip(out.rows_mut()) {
        for (k, &v) in a_row.iter().enumerate() {
            if v != 0.0 {
                out_row.scaled_add(v, &b.row(k));
            }
        }
    }
    out
}

/// `a^T * b`, skipping zero entries of `a` when it is mostly zeros.
pub fn matmul_tn(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    assert_eq!(a.nrows(), b.nrows(), "matmul_tn inner dimension");
    if density(a) >= SPARSE_DENSITY {
        return a.t().dot(&b);
    }
    let mut out = Array2::zeros((a.ncols(), b.ncols()));
    for (a_row, b_row) in a.rows().into_iter().zip(b.rows()) {
        for (k, &v) in a_row.iter().enumerate() {
            if v != 0.0 {
                out.row_mut(k).scaled_add(v, &b_row);
            }
        }
    }
    out
}
