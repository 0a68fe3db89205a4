use nalgebra::DVector;

use crate::error::{Result, SolverError};

/// Triplet accumulator for building a [`SparseMatrix`]. Duplicate entries
/// are summed on compression.
#[derive(Debug, Clone)]
pub struct Triplets {
    nrows: usize,
    ncols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, rows: Vec::new(), cols: Vec::new(), vals: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            rows: Vec::with_capacity(cap),
            cols: Vec::with_capacity(cap),
            vals: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.rows.push(row);
        self.cols.push(col);
        self.vals.push(val);
    }

    /// Adds `alpha * block` with its upper-left corner at `(row0, col0)`.
    pub fn push_block(&mut self, row0: usize, col0: usize, block: &SparseMatrix, alpha: f64) {
        for col in 0..block.ncols() {
            for (row, val) in block.col_iter(col) {
                self.push(row0 + row, col0 + col, alpha * val);
            }
        }
    }

    /// Adds the transpose of `block` at `(row0, col0)` scaled by `alpha`.
    pub fn push_block_transposed(
        &mut self,
        row0: usize,
        col0: usize,
        block: &SparseMatrix,
        alpha: f64,
    ) {
        for col in 0..block.ncols() {
            for (row, val) in block.col_iter(col) {
                self.push(row0 + col, col0 + row, alpha * val);
            }
        }
    }

    pub fn compress(self) -> SparseMatrix {
        SparseMatrix::from_triplets(self.nrows, self.ncols, &self.rows, &self.cols, &self.vals)
    }
}

/// Sparse matrix in compressed sparse column form.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        rows: &[usize],
        cols: &[usize],
        vals: &[f64],
    ) -> Self {
        assert_eq!(rows.len(), cols.len());
        assert_eq!(rows.len(), vals.len());
        // counting sort by column
        let mut count = vec![0usize; ncols + 1];
        for &c in cols {
            count[c + 1] += 1;
        }
        for j in 0..ncols {
            count[j + 1] += count[j];
        }
        let nnz = rows.len();
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![0.0f64; nnz];
        let mut next = count.clone();
        for k in 0..nnz {
            let p = next[cols[k]];
            row_idx[p] = rows[k];
            values[p] = vals[k];
            next[cols[k]] += 1;
        }
        // sort rows within each column and merge duplicates
        let mut out_rows = Vec::with_capacity(nnz);
        let mut out_vals = Vec::with_capacity(nnz);
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for j in 0..ncols {
            scratch.clear();
            for p in count[j]..count[j + 1] {
                scratch.push((row_idx[p], values[p]));
            }
            scratch.sort_unstable_by_key(|e| e.0);
            let mut i = 0;
            while i < scratch.len() {
                let r = scratch[i].0;
                let mut v = scratch[i].1;
                i += 1;
                while i < scratch.len() && scratch[i].0 == r {
                    v += scratch[i].1;
                    i += 1;
                }
                out_rows.push(r);
                out_vals.push(v);
            }
            col_ptr[j + 1] = out_rows.len();
        }
        Self { nrows, ncols, col_ptr, row_idx: out_rows, values: out_vals }
    }

    pub fn identity(n: usize) -> Self {
        let idx: Vec<usize> = (0..n).collect();
        let vals = vec![1.0; n];
        Self::from_triplets(n, n, &idx, &idx, &vals)
    }

    pub fn diagonal(d: &DVector<f64>) -> Self {
        let idx: Vec<usize> = (0..d.len()).collect();
        let vals: Vec<f64> = d.iter().copied().collect();
        Self::from_triplets(d.len(), d.len(), &idx, &idx, &vals)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Iterates `(row, value)` pairs of column `j`.
    pub fn col_iter(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.ncols {
            return Err(SolverError::DimensionMismatch { expected: self.ncols, got: v.len() });
        }
        let mut out = DVector::zeros(self.nrows);
        for j in 0..self.ncols {
            let vj = v[j];
            if vj != 0.0 {
                for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                    out[self.row_idx[p]] += self.values[p] * vj;
                }
            }
        }
        Ok(out)
    }

    pub fn apply_transpose(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.nrows {
            return Err(SolverError::DimensionMismatch { expected: self.nrows, got: v.len() });
        }
        let mut out = DVector::zeros(self.ncols);
        for j in 0..self.ncols {
            let mut acc = 0.0;
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                acc += self.values[p] * v[self.row_idx[p]];
            }
            out[j] = acc;
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        let mut rows = Vec::with_capacity(self.nnz());
        let mut cols = Vec::with_capacity(self.nnz());
        let mut vals = Vec::with_capacity(self.nnz());
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                rows.push(j);
                cols.push(self.row_idx[p]);
                vals.push(self.values[p]);
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &rows, &cols, &vals)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for j in 0..self.ncols {
            for (i, v) in self.col_iter(j) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Symmetrized adjacency pattern (of `A + A^T`) as per-node neighbor lists,
    /// excluding the diagonal. Only valid for square matrices.
    pub fn symmetric_adjacency(&self) -> Vec<Vec<usize>> {
        assert_eq!(self.nrows, self.ncols);
        let mut adj = vec![Vec::new(); self.nrows];
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                if i != j {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = SparseMatrix::from_triplets(2, 2, &[0, 0, 1], &[0, 0, 1], &[1.0, 2.0, 5.0]);
        assert_eq!(m.nnz(), 2);
        let d = m.to_dense();
        assert_eq!(d[(0, 0)], 3.0);
        assert_eq!(d[(1, 1)], 5.0);
    }

    #[test]
    fn apply_matches_dense() {
        let m = SparseMatrix::from_triplets(
            3,
            2,
            &[0, 1, 2, 2],
            &[0, 1, 0, 1],
            &[1.0, -2.0, 3.0, 4.0],
        );
        let v = DVector::from_vec(vec![2.0, 1.0]);
        let out = m.apply(&v).unwrap();
        assert_eq!(out, DVector::from_vec(vec![2.0, -2.0, 10.0]));
        let w = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let tout = m.apply_transpose(&w).unwrap();
        assert_eq!(tout, DVector::from_vec(vec![4.0, 2.0]));
    }
}
