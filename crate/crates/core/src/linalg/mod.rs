//! Linear algebra kernels: compressed sparse storage, a fill-reducing
//! ordering, and direct LU factorizations (sparse and dense) used for the
//! saddle-point systems of the solver.

mod dense;
mod lu;
mod ordering;
mod sparse;

pub use dense::DenseLu;
pub use lu::{Factorization, LuStats};
pub use ordering::reverse_cuthill_mckee;
pub use sparse::{SparseMatrix, Triplets};

use crate::error::Result;

/// Factorizes a square sparse matrix, choosing a dense kernel for small
/// dimensions and the sparse left-looking LU otherwise.
pub fn factorize(matrix: &SparseMatrix) -> Result<Factorization> {
    Factorization::new(matrix)
}
