use nalgebra::DVector;

use crate::error::{Result, SolverError};
use crate::linalg::{factorize, Factorization, SparseMatrix};
use crate::problem::Problem;

/// Inner-product structure of a coordinate space, given by a symmetric
/// positive definite Gram operator `G` together with the action of its
/// inverse. Identity and diagonal metrics avoid any factorization; sparse
/// metrics carry a cached direct factorization for the solve.
pub struct SpaceMetric {
    dim: usize,
    kind: MetricKind,
}

enum MetricKind {
    Identity,
    Diagonal(DVector<f64>),
    Sparse { gram: SparseMatrix, factor: Factorization },
}

impl SpaceMetric {
    pub fn identity(dim: usize) -> Self {
        Self { dim, kind: MetricKind::Identity }
    }

    pub fn diagonal(d: DVector<f64>) -> Self {
        assert!(d.iter().all(|v| *v > 0.0), "diagonal metric must be positive");
        Self { dim: d.len(), kind: MetricKind::Diagonal(d) }
    }

    pub fn sparse(gram: SparseMatrix) -> Result<Self> {
        let factor = factorize(&gram)?;
        Ok(Self { dim: gram.nrows(), kind: MetricKind::Sparse { gram, factor } })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, MetricKind::Identity)
    }

    /// Applies the Gram operator, `v ↦ G v`.
    pub fn gram_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(v.len(), self.dim);
        match &self.kind {
            MetricKind::Identity => v.clone(),
            MetricKind::Diagonal(d) => v.component_mul(d),
            MetricKind::Sparse { gram, .. } => gram.apply(v).expect("metric dim"),
        }
    }

    /// Applies the inverse, `v ↦ G⁻¹ v`.
    pub fn gram_solve(&self, v: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(v.len(), self.dim);
        match &self.kind {
            MetricKind::Identity => v.clone(),
            MetricKind::Diagonal(d) => v.component_div(d),
            MetricKind::Sparse { factor, .. } => factor.solve(v).expect("metric solve"),
        }
    }

    /// Metric inner product `<a, b> = a^T G b`.
    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match &self.kind {
            MetricKind::Identity => a.dot(b),
            MetricKind::Diagonal(d) => a.iter().zip(b.iter()).zip(d.iter()).map(|((x, y), g)| x * y * g).sum(),
            MetricKind::Sparse { gram, .. } => a.dot(&gram.apply(b).expect("metric dim")),
        }
    }

    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    /// Norm of a vector given in dual coordinates, `sqrt(w^T G⁻¹ w)`.
    pub fn dual_norm(&self, w: &DVector<f64>) -> f64 {
        w.dot(&self.gram_solve(w)).max(0.0).sqrt()
    }

    /// Contribution of this metric to the assembled system, as a sparse
    /// matrix (identity, diagonal, or the Gram matrix itself).
    pub fn gram_matrix(&self) -> SparseMatrix {
        match &self.kind {
            MetricKind::Identity => SparseMatrix::identity(self.dim),
            MetricKind::Diagonal(d) => SparseMatrix::diagonal(d),
            MetricKind::Sparse { gram, .. } => gram.clone(),
        }
    }
}

impl std::fmt::Debug for SpaceMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.kind {
            MetricKind::Identity => "identity",
            MetricKind::Diagonal(_) => "diagonal",
            MetricKind::Sparse { .. } => "sparse",
        };
        write!(f, "SpaceMetric({kind}, dim={})", self.dim)
    }
}

/// Primal-dual point `z = (x, y)`. Dual vectors are stored in Riesz
/// representation throughout, which for identity metrics is the plain
/// multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDual {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

impl PrimalDual {
    pub fn new(x: DVector<f64>, y: DVector<f64>) -> Self {
        Self { x, y }
    }

    pub fn zeros(n_x: usize, n_y: usize) -> Self {
        Self { x: DVector::zeros(n_x), y: DVector::zeros(n_y) }
    }

    pub fn from_slices(x: &[f64], y: &[f64]) -> Self {
        Self { x: DVector::from_row_slice(x), y: DVector::from_row_slice(y) }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite()) && self.y.iter().all(|v| v.is_finite())
    }

    /// Componentwise `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &PrimalDual) -> PrimalDual {
        PrimalDual { x: &self.x + alpha * &other.x, y: &self.y + alpha * &other.y }
    }

    pub fn sub(&self, other: &PrimalDual) -> PrimalDual {
        PrimalDual { x: &self.x - &other.x, y: &self.y - &other.y }
    }
}

/// Product norm on `Z = X × Y` through the problem metrics.
pub fn z_norm(z: &PrimalDual, problem: &dyn Problem) -> Result<f64> {
    if z.x.len() != problem.dim_x() {
        return Err(SolverError::DimensionMismatch { expected: problem.dim_x(), got: z.x.len() });
    }
    if z.y.len() != problem.dim_y() {
        return Err(SolverError::DimensionMismatch { expected: problem.dim_y(), got: z.y.len() });
    }
    let nx = problem.metric_x().norm(&z.x);
    let ny = problem.metric_y().norm(&z.y);
    Ok((nx * nx + ny * ny).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_metric_roundtrip() {
        let d = DVector::from_vec(vec![2.0, 0.5, 4.0]);
        let m = SpaceMetric::diagonal(d);
        let v = DVector::from_vec(vec![1.0, -3.0, 2.0]);
        let back = m.gram_solve(&m.gram_apply(&v));
        assert!((back - &v).amax() < 1e-14);
    }

    #[test]
    fn sparse_metric_norm_matches_dense() {
        // 2x2 grid Laplacian-like SPD matrix
        let rows = [0usize, 0, 1, 1, 2, 2, 3, 3, 0, 1, 2, 3];
        let cols = [1usize, 2, 0, 3, 0, 3, 1, 2, 0, 1, 2, 3];
        let mut vals = vec![-1.0; 8];
        vals.extend_from_slice(&[4.0, 4.0, 4.0, 4.0]);
        let g = SparseMatrix::from_triplets(4, 4, &rows, &cols, &vals);
        let dense = g.to_dense();
        let m = SpaceMetric::sparse(g).unwrap();
        let v = DVector::from_vec(vec![0.3, -1.2, 0.7, 2.0]);
        let expect = (v.dot(&(&dense * &v))).sqrt();
        assert!((m.norm(&v) - expect).abs() < 1e-12);
        let back = m.gram_solve(&m.gram_apply(&v));
        assert!((back - &v).amax() < 1e-10);
    }
}
