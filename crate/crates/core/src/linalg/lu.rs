use nalgebra::DVector;

use super::{reverse_cuthill_mckee, DenseLu, SparseMatrix};
use crate::error::{Result, SolverError};

/// Below this dimension a dense kernel is faster than the sparse machinery.
const DENSE_CUTOFF: usize = 64;

/// Threshold for preferring the diagonal pivot over the column maximum.
const PIVOT_TOL: f64 = 0.1;

/// Relative residual above which [`Factorization::solve`] runs refinement.
const REFINE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Default)]
pub struct LuStats {
    pub nnz_l: usize,
    pub nnz_u: usize,
    pub refinement_sweeps: u64,
}

/// Direct LU factorization of a square sparse matrix with partial pivoting.
///
/// Small systems fall back to a dense kernel. Large systems are reordered by
/// reverse Cuthill-McKee and factorized by a left-looking sparse LU with
/// threshold partial pivoting. Solves check the true residual and apply up
/// to two sweeps of iterative refinement.
pub struct Factorization {
    matrix: SparseMatrix,
    kernel: Kernel,
    refinement_sweeps: std::sync::atomic::AtomicU64,
}

enum Kernel {
    Dense(DenseLu),
    Sparse(SparseLu),
}

impl Factorization {
    pub fn new(matrix: &SparseMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(SolverError::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        if !matrix.is_finite() {
            return Err(SolverError::NonFinite("matrix entries"));
        }
        let kernel = if matrix.nrows() <= DENSE_CUTOFF {
            Kernel::Dense(DenseLu::new(&matrix.to_dense())?)
        } else {
            Kernel::Sparse(SparseLu::new(matrix)?)
        };
        Ok(Self { matrix: matrix.clone(), kernel, refinement_sweeps: std::sync::atomic::AtomicU64::new(0) })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn stats(&self) -> LuStats {
        let (nnz_l, nnz_u) = match &self.kernel {
            Kernel::Dense(_) => (0, 0),
            Kernel::Sparse(lu) => (lu.l_val.len(), lu.u_val.len()),
        };
        LuStats {
            nnz_l,
            nnz_u,
            refinement_sweeps: self.refinement_sweeps.load(std::sync::atomic::Ordering::Relaxed),
        }
    }

    fn solve_raw(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match &self.kernel {
            Kernel::Dense(lu) => lu.solve(rhs),
            Kernel::Sparse(lu) => lu.solve(rhs),
        }
    }

    /// Solves `A x = rhs` with iterative refinement on the stored matrix.
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        if rhs.len() != self.dim() {
            return Err(SolverError::DimensionMismatch { expected: self.dim(), got: rhs.len() });
        }
        let mut x = self.solve_raw(rhs);
        let rhs_norm = rhs.amax();
        if rhs_norm == 0.0 {
            return Ok(x);
        }
        for _ in 0..2 {
            let residual = rhs - self.matrix.apply(&x)?;
            if !residual.iter().all(|v| v.is_finite()) {
                return Err(SolverError::NonFinite("solve residual"));
            }
            if residual.amax() <= REFINE_TOL * rhs_norm {
                break;
            }
            self.refinement_sweeps.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            let correction = self.solve_raw(&residual);
            x += correction;
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(SolverError::NonFinite("solution"));
        }
        Ok(x)
    }
}

/// Left-looking sparse LU with threshold partial pivoting, in the style of
/// Gilbert-Peierls. Row indices of `L`/`U` are in pivotal order; `q` is the
/// fill-reducing column order and `pinv` the row permutation chosen by
/// pivoting.
struct SparseLu {
    n: usize,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    pinv: Vec<usize>,
    q: Vec<usize>,
}

impl SparseLu {
    fn new(a: &SparseMatrix) -> Result<Self> {
        let n = a.nrows();
        let q = reverse_cuthill_mckee(a);

        let mut l_ptr = Vec::with_capacity(n + 1);
        let mut l_idx: Vec<usize> = Vec::with_capacity(4 * a.nnz());
        let mut l_val: Vec<f64> = Vec::with_capacity(4 * a.nnz());
        let mut u_ptr = Vec::with_capacity(n + 1);
        let mut u_idx: Vec<usize> = Vec::with_capacity(4 * a.nnz());
        let mut u_val: Vec<f64> = Vec::with_capacity(4 * a.nnz());
        l_ptr.push(0);
        u_ptr.push(0);

        const UNSET: usize = usize::MAX;
        let mut pinv = vec![UNSET; n];
        let mut x = vec![0.0f64; n];
        let mut stamp = vec![0u32; n]; // visited marks keyed by column stamp
        let mut topo: Vec<usize> = Vec::with_capacity(n);
        let mut dfs_stack: Vec<(usize, usize)> = Vec::new();

        let col_ptr = a.col_ptr();
        let row_idx = a.row_idx();
        let values = a.values();

        for k in 0..n {
            let jcol = q[k];
            let mark = (k + 1) as u32;

            // symbolic: reach of the column pattern through finished L columns
            topo.clear();
            for p in col_ptr[jcol]..col_ptr[jcol + 1] {
                let i = row_idx[p];
                if stamp[i] != mark {
                    dfs_from(i, mark, &mut stamp, &mut topo, &mut dfs_stack, &l_ptr, &l_idx, &pinv);
                }
            }

            // numeric: scatter the column, then eliminate in topological order
            for p in col_ptr[jcol]..col_ptr[jcol + 1] {
                x[row_idx[p]] = values[p];
            }
            for &i in topo.iter().rev() {
                let pi = pinv[i];
                if pi == UNSET {
                    continue;
                }
                let xi = x[i];
                if xi != 0.0 {
                    // skip the unit diagonal stored first in each L column
                    for p in l_ptr[pi] + 1..l_ptr[pi + 1] {
                        x[l_idx[p]] -= l_val[p] * xi;
                    }
                }
            }

            // pivot choice: largest unpivoted magnitude, diagonal preferred
            let mut pivot_row = UNSET;
            let mut pivot_mag = 0.0f64;
            for &i in &topo {
                if pinv[i] == UNSET {
                    let mag = x[i].abs();
                    if mag > pivot_mag {
                        pivot_mag = mag;
                        pivot_row = i;
                    }
                }
            }
            if pivot_row == UNSET || pivot_mag == 0.0 || !pivot_mag.is_finite() {
                return Err(SolverError::Singular { index: jcol });
            }
            if pinv[jcol] == UNSET && x[jcol].abs() >= PIVOT_TOL * pivot_mag {
                pivot_row = jcol;
            }
            let pivot = x[pivot_row];

            // emit U column (pivotal row indices), pivot last
            for &i in &topo {
                let pi = pinv[i];
                if pi != UNSET {
                    if x[i] != 0.0 {
                        u_idx.push(pi);
                        u_val.push(x[i]);
                    }
                }
                // x is reset lazily here so the scatter stays O(pattern)
            }
            u_idx.push(k);
            u_val.push(pivot);
            u_ptr.push(u_idx.len());

            // emit L column with unit diagonal first
            pinv[pivot_row] = k;
            l_idx.push(pivot_row);
            l_val.push(1.0);
            for &i in &topo {
                if pinv[i] == UNSET {
                    let v = x[i];
                    if v != 0.0 {
                        l_idx.push(i);
                        l_val.push(v / pivot);
                    }
                }
                x[i] = 0.0;
            }
            x[pivot_row] = 0.0;
            l_ptr.push(l_idx.len());
        }

        // convert L row indices to pivotal order
        for idx in l_idx.iter_mut() {
            *idx = pinv[*idx];
        }

        Ok(Self { n, l_ptr, l_idx, l_val, u_ptr, u_idx, u_val, pinv, q })
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut w = vec![0.0f64; n];
        for i in 0..n {
            w[self.pinv[i]] = b[i];
        }
        // forward solve, unit diagonal stored first in each column
        for j in 0..n {
            let wj = w[j];
            if wj != 0.0 {
                for p in self.l_ptr[j] + 1..self.l_ptr[j + 1] {
                    w[self.l_idx[p]] -= self.l_val[p] * wj;
                }
            }
        }
        // back solve, pivot stored last in each column
        for j in (0..n).rev() {
            let last = self.u_ptr[j + 1] - 1;
            let wj = w[j] / self.u_val[last];
            w[j] = wj;
            if wj != 0.0 {
                for p in self.u_ptr[j]..last {
                    w[self.u_idx[p]] -= self.u_val[p] * wj;
                }
            }
        }
        let mut out = DVector::zeros(n);
        for j in 0..n {
            out[self.q[j]] = w[j];
        }
        out
    }
}

/// Depth-first search through finished L columns, pushing nodes in
/// postorder onto `topo`. Iterative so deep elimination trees cannot
/// overflow the stack.
#[allow(clippy::too_many_arguments)]
fn dfs_from(
    start: usize,
    mark: u32,
    stamp: &mut [u32],
    topo: &mut Vec<usize>,
    stack: &mut Vec<(usize, usize)>,
    l_ptr: &[usize],
    l_idx: &[usize],
    pinv: &[usize],
) {
    const UNSET: usize = usize::MAX;
    stack.clear();
    stamp[start] = mark;
    stack.push((start, 0));
    while let Some(&(node, child)) = stack.last() {
        let pi = pinv[node];
        let (begin, end) = if pi == UNSET {
            (0, 0)
        } else {
            (l_ptr[pi] + 1, l_ptr[pi + 1])
        };
        let mut cursor = child;
        let mut descended = false;
        while begin + cursor < end {
            let next = l_idx[begin + cursor];
            cursor += 1;
            if stamp[next] != mark {
                stamp[next] = mark;
                stack.last_mut().unwrap().1 = cursor;
                stack.push((next, 0));
                descended = true;
                break;
            }
        }
        if !descended {
            topo.push(node);
            stack.pop();
        }
    }
}
