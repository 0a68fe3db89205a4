//! The small analytic benchmarks: a kinematic pendulum on the unit circle,
//! a scalar problem with tunable flow stiffness, a nonconvex bound-constrained
//! quadratic program, and seeded random equality-constrained QPs.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::boxes::BoxBounds;
use crate::error::{Result, SolverError};
use crate::linalg::{DenseLu, SparseMatrix, Triplets};
use crate::problem::Problem;
use crate::space::SpaceMetric;

/// `min x_2` on the unit circle `x_1² + x_2² = 1`. The hanging position
/// `(0, -1)` with multiplier `1/2` is the minimum; the inverted position is
/// the other critical point.
pub struct Pendulum {
    metric_x: SpaceMetric,
    metric_y: SpaceMetric,
    bounds: BoxBounds,
}

pub fn pendulum_problem() -> Pendulum {
    Pendulum {
        metric_x: SpaceMetric::identity(2),
        metric_y: SpaceMetric::identity(1),
        bounds: BoxBounds::free(2),
    }
}

impl Problem for Pendulum {
    fn dim_x(&self) -> usize {
        2
    }
    fn dim_y(&self) -> usize {
        1
    }
    fn metric_x(&self) -> &SpaceMetric {
        &self.metric_x
    }
    fn metric_y(&self) -> &SpaceMetric {
        &self.metric_y
    }
    fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }
    fn phi(&self, x: &DVector<f64>) -> f64 {
        x[1]
    }
    fn grad_phi_dual(&self, _x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![0.0, 1.0])
    }
    fn constraint(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, x[0] * x[0] + x[1] * x[1] - 1.0)
    }
    fn jac_c(&self, x: &DVector<f64>) -> SparseMatrix {
        SparseMatrix::from_triplets(1, 2, &[0, 0], &[0, 1], &[2.0 * x[0], 2.0 * x[1]])
    }
    fn hess_lagrangian(&self, _x: &DVector<f64>, y_tilde: &DVector<f64>) -> SparseMatrix {
        let d = 2.0 * y_tilde[0];
        SparseMatrix::from_triplets(2, 2, &[0, 1], &[0, 1], &[d, d])
    }
    fn name(&self) -> &str {
        "pendulum"
    }
}

/// `min -x²/2 subject to x = 0`; the flow linearization has system matrix
/// `[[1-ρ, -1], [1, 0]]`, unstable for ρ < 1 and increasingly stiff as
/// ρ grows.
pub struct Scalar {
    metric_x: SpaceMetric,
    metric_y: SpaceMetric,
    bounds: BoxBounds,
}

pub fn scalar_problem() -> Scalar {
    Scalar {
        metric_x: SpaceMetric::identity(1),
        metric_y: SpaceMetric::identity(1),
        bounds: BoxBounds::free(1),
    }
}

impl Problem for Scalar {
    fn dim_x(&self) -> usize {
        1
    }
    fn dim_y(&self) -> usize {
        1
    }
    fn metric_x(&self) -> &SpaceMetric {
        &self.metric_x
    }
    fn metric_y(&self) -> &SpaceMetric {
        &self.metric_y
    }
    fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }
    fn phi(&self, x: &DVector<f64>) -> f64 {
        -0.5 * x[0] * x[0]
    }
    fn grad_phi_dual(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, -x[0])
    }
    fn constraint(&self, x: &DVector<f64>) -> DVector<f64> {
        x.clone()
    }
    fn jac_c(&self, _x: &DVector<f64>) -> SparseMatrix {
        SparseMatrix::identity(1)
    }
    fn hess_lagrangian(&self, _x: &DVector<f64>, _y_tilde: &DVector<f64>) -> SparseMatrix {
        SparseMatrix::from_triplets(1, 1, &[0], &[0], &[-1.0])
    }
    fn name(&self) -> &str {
        "scalar"
    }
}

/// `min (x_1² - x_2²)/2 over x_2 ≥ 0 subject to x_1 = 0`. The origin is
/// critical while the objective is unbounded along the feasible ray, so its
/// stability under the projected flow is the interesting question.
pub struct NonconvexQp {
    metric_x: SpaceMetric,
    metric_y: SpaceMetric,
    bounds: BoxBounds,
}

pub fn nonconvex_qp_problem() -> NonconvexQp {
    NonconvexQp {
        metric_x: SpaceMetric::identity(2),
        metric_y: SpaceMetric::identity(1),
        bounds: BoxBounds::new(
            DVector::from_vec(vec![f64::NEG_INFINITY, 0.0]),
            DVector::from_vec(vec![f64::INFINITY, f64::INFINITY]),
        )
        .expect("static bounds"),
    }
}

impl Problem for NonconvexQp {
    fn dim_x(&self) -> usize {
        2
    }
    fn dim_y(&self) -> usize {
        1
    }
    fn metric_x(&self) -> &SpaceMetric {
        &self.metric_x
    }
    fn metric_y(&self) -> &SpaceMetric {
        &self.metric_y
    }
    fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }
    fn phi(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x[0] * x[0] - x[1] * x[1])
    }
    fn grad_phi_dual(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![x[0], -x[1]])
    }
    fn constraint(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, x[0])
    }
    fn jac_c(&self, _x: &DVector<f64>) -> SparseMatrix {
        SparseMatrix::from_triplets(1, 2, &[0], &[0], &[1.0])
    }
    fn hess_lagrangian(&self, _x: &DVector<f64>, _y_tilde: &DVector<f64>) -> SparseMatrix {
        SparseMatrix::from_triplets(2, 2, &[0, 1], &[0, 1], &[1.0, -1.0])
    }
    fn name(&self) -> &str {
        "nonconvex-qp"
    }
}

/// Seeded random QP `min x^T H x / 2 - g^T x subject to A x = b` with a
/// symmetric, possibly indefinite `H` and a full-row-rank `A`.
pub struct RandomQp {
    h: DMatrix<f64>,
    a: DMatrix<f64>,
    g: DVector<f64>,
    b: DVector<f64>,
    h_sparse: SparseMatrix,
    a_sparse: SparseMatrix,
    metric_x: SpaceMetric,
    metric_y: SpaceMetric,
    bounds: BoxBounds,
}

pub fn random_qp_problem(n: usize, m: usize, seed: u64) -> Result<RandomQp> {
    if m > n {
        return Err(SolverError::InvalidParameter(format!(
            "need m <= n, got m = {m}, n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let h = 0.5 * (&raw + raw.transpose());
    let g = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let b = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));

    let mut a = DMatrix::zeros(m, n);
    let mut full_rank = false;
    for _ in 0..10 {
        a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        // A has full row rank iff A A^T is nonsingular
        let gram = &a * a.transpose();
        if DenseLu::new(&gram).is_ok() {
            full_rank = true;
            break;
        }
    }
    if !full_rank {
        return Err(SolverError::InvalidParameter(
            "failed to draw a full-row-rank constraint matrix".into(),
        ));
    }

    let h_sparse = dense_to_sparse(&h);
    let a_sparse = dense_to_sparse(&a);
    Ok(RandomQp {
        h,
        a,
        g,
        b,
        h_sparse,
        a_sparse,
        metric_x: SpaceMetric::identity(n),
        metric_y: SpaceMetric::identity(m),
        bounds: BoxBounds::free(n),
    })
}

fn dense_to_sparse(m: &DMatrix<f64>) -> SparseMatrix {
    let mut t = Triplets::new(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != 0.0 {
                t.push(i, j, m[(i, j)]);
            }
        }
    }
    t.compress()
}

impl RandomQp {
    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.h
    }
    pub fn constraint_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn linear_term(&self) -> &DVector<f64> {
        &self.g
    }
    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }

    /// Solves the stationarity system `[H A^T; A 0] (x, y) = (g, b)` densely.
    pub fn kkt_solution(&self) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.dim_x();
        let m = self.dim_y();
        let mut kkt = DMatrix::zeros(n + m, n + m);
        kkt.view_mut((0, 0), (n, n)).copy_from(&self.h);
        kkt.view_mut((0, n), (n, m)).copy_from(&self.a.transpose());
        kkt.view_mut((n, 0), (m, n)).copy_from(&self.a);
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&self.g);
        rhs.rows_mut(n, m).copy_from(&self.b);
        let lu = DenseLu::new(&kkt)?;
        let sol = lu.solve(&rhs);
        Ok((sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned()))
    }
}

impl Problem for RandomQp {
    fn dim_x(&self) -> usize {
        self.h.nrows()
    }
    fn dim_y(&self) -> usize {
        self.a.nrows()
    }
    fn metric_x(&self) -> &SpaceMetric {
        &self.metric_x
    }
    fn metric_y(&self) -> &SpaceMetric {
        &self.metric_y
    }
    fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }
    fn phi(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) - self.g.dot(x)
    }
    fn grad_phi_dual(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.h * x - &self.g
    }
    fn constraint(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x - &self.b
    }
    fn jac_c(&self, _x: &DVector<f64>) -> SparseMatrix {
        self.a_sparse.clone()
    }
    fn hess_lagrangian(&self, _x: &DVector<f64>, _y_tilde: &DVector<f64>) -> SparseMatrix {
        self.h_sparse.clone()
    }
    fn name(&self) -> &str {
        "random-qp"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pendulum_values() {
        let p = pendulum_problem();
        assert_relative_eq!(p.phi(&DVector::from_vec(vec![0.0, -1.0])), -1.0);
        let c = p.constraint(&DVector::from_vec(vec![0.6, 0.8]));
        assert_relative_eq!(c[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn scalar_solution_and_matrix() {
        let s = scalar_problem();
        assert_relative_eq!(s.phi(&DVector::from_element(1, 2.0)), -2.0);
        // flow matrix [[1-rho, -1], [1, 0]] realized through the callbacks:
        // d(-grad_x L)/dx = 1 - rho, d(-grad_x L)/dy = -1, dc/dx = 1
        let rho = 0.7;
        let z = crate::space::PrimalDual::from_slices(&[1.0], &[0.0]);
        let g = crate::aug_lagrangian::grad_x_l_rho(&z, &s, rho).unwrap();
        assert_relative_eq!(-g[0], (1.0 - rho) * 1.0, epsilon = 1e-15);
    }

    #[test]
    fn nonconvex_qp_critical_origin() {
        let q = nonconvex_qp_problem();
        let z = crate::space::PrimalDual::from_slices(&[0.0, 0.0], &[0.0]);
        let (stat, feas) = crate::boxes::criticality_residual(&z, &q, 0.0).unwrap();
        assert!(stat <= 1e-15 && feas <= 1e-15);
        // objective unbounded along the feasible ray (0, t)
        assert!(q.phi(&DVector::from_vec(vec![0.0, 10.0])) < q.phi(&DVector::from_vec(vec![0.0, 1.0])));
    }

    #[test]
    fn random_qp_zero_data_solution() {
        // zero H still counts: build by seed then override via kkt on zero data
        let qp = random_qp_problem(5, 2, 1).unwrap();
        let (x, y) = qp.kkt_solution().unwrap();
        // stationarity check of the dense oracle solution
        let r1 = qp.hessian() * &x + qp.constraint_matrix().transpose() * &y - qp.linear_term();
        let r2 = qp.constraint_matrix() * &x - qp.rhs();
        assert!(r1.amax() <= 1e-10 && r2.amax() <= 1e-10);
    }

    #[test]
    fn random_qp_rejects_bad_dims() {
        assert!(random_qp_problem(3, 5, 0).is_err());
    }
}
