use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SolverError};

/// Dense LU with partial pivoting, used for small systems and as the
/// fallback kernel of [`super::Factorization`].
pub struct DenseLu {
    n: usize,
    /// Packed factors: strictly lower part holds L (unit diagonal), upper
    /// part including the diagonal holds U.
    lu: DMatrix<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(SolverError::DimensionMismatch { expected: a.nrows(), got: a.ncols() });
        }
        let n = a.nrows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut pivot_row = k;
            let mut pivot_mag = lu[(k, k)].abs();
            for i in k + 1..n {
                let mag = lu[(i, k)].abs();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = i;
                }
            }
            if pivot_mag == 0.0 || !pivot_mag.is_finite() {
                return Err(SolverError::Singular { index: k });
            }
            if pivot_row != k {
                lu.swap_rows(pivot_row, k);
                perm.swap(pivot_row, k);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor != 0.0 {
                    for j in k + 1..n {
                        let upd = factor * lu[(k, j)];
                        lu[(i, j)] -= upd;
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    /// Smallest and largest magnitude among the pivots of `U`, a cheap
    /// near-singularity indicator.
    pub fn pivot_range(&self) -> (f64, f64) {
        let mut min = f64::INFINITY;
        let mut max = 0.0f64;
        for k in 0..self.n {
            let p = self.lu[(k, k)].abs();
            min = min.min(p);
            max = max.max(p);
        }
        (min, max)
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut x = DVector::zeros(n);
        for i in 0..n {
            x[i] = b[self.perm[i]];
        }
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_nalgebra_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1usize, 2, 7, 30] {
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
                + DMatrix::identity(n, n) * 3.0;
            let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let lu = DenseLu::new(&a).unwrap();
            let x = lu.solve(&b);
            let oracle = a.clone().lu().solve(&b).unwrap();
            assert!((x - oracle).amax() < 1e-12);
        }
    }

    #[test]
    fn singular_detected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(DenseLu::new(&a), Err(SolverError::Singular { .. })));
    }
}
