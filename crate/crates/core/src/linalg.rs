//! Compressed sparse row storage for constraint matrices.
//!
//! Routing matrices are very sparse (a column touches only the links on its
//! paths), and the projection solvers walk one row at a time, so CSR is the
//! natural layout.

use crate::error::{Error, Result};

/// Sparse real matrix in compressed-row form. Column indices within a row are
/// strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Borrowed view of a single matrix row.
#[derive(Debug, Clone, Copy)]
pub struct RowView<'a> {
    pub cols: &'a [usize],
    pub values: &'a [f64],
}

impl RowView<'_> {
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.cols
            .iter()
            .zip(self.values)
            .map(|(&j, &a)| a * x[j])
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|a| a * a).sum()
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }
}

impl CsrMatrix {
    /// Builds a matrix from a row-major dense buffer, dropping exact zeros.
    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::mismatch("dense matrix buffer", rows * cols, data.len()));
        }
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in data.chunks(cols.max(1)).take(rows) {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        // cols == 0 means no chunks were produced
        row_ptr.resize(rows + 1, col_idx.len());
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds a matrix from per-row lists of `(column, value)`. Entries within
    /// a row may come in any order; duplicates are summed and zeros dropped.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows.into_iter() {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if j >= cols {
                    return Err(Error::mismatch("sparse row column index", cols, j + 1));
                }
                if last == Some(j) {
                    *values.last_mut().expect("entry exists") += v;
                    continue;
                }
                col_idx.push(j);
                values.push(v);
                last = Some(j);
            }
            row_ptr.push(col_idx.len());
        }
        let mut m = Self {
            rows: row_ptr.len() - 1,
            cols,
            row_ptr,
            col_idx,
            values,
        };
        m.prune_zeros();
        Ok(m)
    }

    fn prune_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::with_capacity(self.col_idx.len());
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..self.rows {
            let r = self.row(i);
            for (&j, &v) in r.cols.iter().zip(r.values) {
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        self.row_ptr = row_ptr;
        self.col_idx = col_idx;
        self.values = values;
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

    pub fn row(&self, i: usize) -> RowView<'_> {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        RowView {
            cols: &self.col_idx[lo..hi],
            values: &self.values[lo..hi],
        }
    }

    pub fn row_iter(&self) -> impl Iterator<Item = RowView<'_>> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row(i);
        match r.cols.binary_search(&j) {
            Ok(k) => r.values[k],
            Err(_) => 0.0,
        }
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::mismatch("matrix-vector product", self.cols, x.len()));
        }
        Ok(self.row_iter().map(|r| r.dot(x)).collect())
    }

    /// `Aᵀ y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::mismatch("transposed matrix-vector product", self.rows, y.len()));
        }
        let mut out = vec![0.0; self.cols];
        for (r, &yi) in self.row_iter().zip(y) {
            for (&j, &a) in r.cols.iter().zip(r.values) {
                out[j] += a * yi;
            }
        }
        Ok(out)
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for (i, r) in self.row_iter().enumerate() {
            for (&j, &a) in r.cols.iter().zip(r.values) {
                out[i * self.cols + j] = a;
            }
        }
        out
    }

    /// Column `j` as `(row, value)` pairs.
    pub fn column(&self, j: usize) -> Vec<(usize, f64)> {
        (0..self.rows)
            .filter_map(|i| {
                let v = self.get(i, j);
                (v != 0.0).then_some((i, v))
            })
            .collect()
    }

    /// Submatrix made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let (mut col_idx, mut values) = (Vec::new(), Vec::new());
        for &i in rows {
            let r = self.row(i);
            col_idx.extend_from_slice(r.cols);
            values.extend_from_slice(r.values);
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            rows: rows.len(),
            cols: self.cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Index of the first row with no stored entries.
    pub fn first_zero_row(&self) -> Option<usize> {
        (0..self.rows).find(|&i| self.row(i).nnz() == 0)
    }
}

impl AsRef<CsrMatrix> for CsrMatrix {
    fn as_ref(&self) -> &CsrMatrix {
        self
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
