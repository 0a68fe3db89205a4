//! Problem interface shared by all solver components.
//!
//! A [`Problem`] supplies the objective, the equality constraint, their
//! derivatives, box bounds, and the Gram operators of the two spaces. All
//! callback outputs are in coordinate (dual) form, the natural result of
//! assembly; metric gradients are obtained through the Gram solves. Dual
//! vectors passed in (multipliers) are Riesz representations.

use nalgebra::DVector;

use crate::boxes::BoxBounds;
use crate::error::{Result, SolverError};
use crate::linalg::SparseMatrix;
use crate::space::SpaceMetric;

/// Callback bundle defining an equality-constrained program over a box.
///
/// Implementations must be pure: evaluations may be called concurrently and
/// must not carry hidden mutable state.
pub trait Problem: Send + Sync {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;

    fn metric_x(&self) -> &SpaceMetric;
    fn metric_y(&self) -> &SpaceMetric;

    fn bounds(&self) -> &BoxBounds;

    /// Objective value.
    fn phi(&self, x: &DVector<f64>) -> f64;

    /// Coordinate gradient of the objective (dual form, no Gram solve).
    fn grad_phi_dual(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Constraint residual in dual coordinates.
    fn constraint(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Constraint Jacobian in dual coordinates, shape `dim_y x dim_x`.
    fn jac_c(&self, x: &DVector<f64>) -> SparseMatrix;

    /// Symmetric Hessian of the plain Lagrangian at the already-shifted
    /// multiplier `y_tilde` (Riesz representation), in dual coordinates.
    /// The augmentation part is never formed here.
    fn hess_lagrangian(&self, x: &DVector<f64>, y_tilde: &DVector<f64>) -> SparseMatrix;

    fn name(&self) -> &str {
        "problem"
    }
}

/// Metric gradient of the objective, `∇φ(x) = G_X⁻¹ φ'(x)`.
pub fn grad_phi(problem: &dyn Problem, x: &DVector<f64>) -> DVector<f64> {
    problem.metric_x().gram_solve(&problem.grad_phi_dual(x))
}

/// Action of the constraint derivative, `v ↦ c'(x) v` in dual coordinates.
pub fn jac_c_apply(problem: &dyn Problem, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    problem.jac_c(x).apply(v)
}

/// Action of the metric adjoint `∇c(x) = G_X⁻¹ A^T`, applied to a dual
/// vector in Riesz representation; the result is an X-vector.
pub fn jac_c_adjoint_apply(
    problem: &dyn Problem,
    x: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>> {
    let at_w = problem.jac_c(x).apply_transpose(w)?;
    Ok(problem.metric_x().gram_solve(&at_w))
}

/// Report of [`check_derivatives`]: maximum relative deviations between the
/// analytic callbacks and central finite differences.
#[derive(Debug, Clone, Copy)]
pub struct DerivativeReport {
    pub grad_phi_dev: f64,
    pub jac_c_dev: f64,
    pub hess_dev: f64,
}

impl DerivativeReport {
    pub fn max_dev(&self) -> f64 {
        self.grad_phi_dev.max(self.jac_c_dev).max(self.hess_dev)
    }
}

/// Validates `grad_phi_dual`, `jac_c`, and `hess_lagrangian` against central
/// finite differences of step `h` at a point strictly inside the box.
///
/// Deviations are relative to the scale of the analytic quantity. The check
/// perturbs coordinates directly, so it compares dual-coordinate objects on
/// both sides.
pub fn check_derivatives(problem: &dyn Problem, x0: &DVector<f64>, h: f64) -> Result<DerivativeReport> {
    if h <= 0.0 {
        return Err(SolverError::InvalidParameter("finite-difference step must be positive".into()));
    }
    if x0.len() != problem.dim_x() {
        return Err(SolverError::DimensionMismatch { expected: problem.dim_x(), got: x0.len() });
    }
    let n = x0.len();
    let grad = problem.grad_phi_dual(x0);
    let jac = problem.jac_c(x0).to_dense();
    // fixed multiplier for the Hessian check
    let y_tilde = DVector::from_fn(problem.dim_y(), |i, _| 0.5 + 0.25 * (i as f64 + 1.0).sin());
    let hess = problem.hess_lagrangian(x0, &y_tilde).to_dense();

    let grad_scale = grad.amax().max(1.0);
    let jac_scale = jac.amax().max(1.0);
    let hess_scale = hess.amax().max(1.0);

    let mut grad_dev: f64 = 0.0;
    let mut jac_dev: f64 = 0.0;
    let mut hess_dev: f64 = 0.0;

    let lagr_grad = |x: &DVector<f64>| -> DVector<f64> {
        problem.grad_phi_dual(x) + problem.jac_c(x).apply_transpose(&y_tilde).expect("dims")
    };

    for j in 0..n {
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[j] += h;
        xm[j] -= h;

        let fd_phi = (problem.phi(&xp) - problem.phi(&xm)) / (2.0 * h);
        grad_dev = grad_dev.max((fd_phi - grad[j]).abs() / grad_scale);

        let fd_c = (problem.constraint(&xp) - problem.constraint(&xm)) / (2.0 * h);
        for i in 0..problem.dim_y() {
            jac_dev = jac_dev.max((fd_c[i] - jac[(i, j)]).abs() / jac_scale);
        }

        let fd_l = (lagr_grad(&xp) - lagr_grad(&xm)) / (2.0 * h);
        for i in 0..n {
            hess_dev = hess_dev.max((fd_l[i] - hess[(i, j)]).abs() / hess_scale);
        }
    }
    Ok(DerivativeReport { grad_phi_dev: grad_dev, jac_c_dev: jac_dev, hess_dev })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{pendulum_problem, random_qp_problem};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pendulum_derivatives() {
        let p = pendulum_problem();
        let x = DVector::from_vec(vec![0.3, 0.4]);
        let report = check_derivatives(&p, &x, 1e-5).unwrap();
        assert!(report.max_dev() <= 1e-6, "{report:?}");
    }

    #[test]
    fn linear_constraint_jacobian_exact() {
        let p = random_qp_problem(6, 3, 17).unwrap();
        let x = DVector::from_fn(6, |i, _| 0.1 * i as f64 - 0.2);
        let report = check_derivatives(&p, &x, 1e-6).unwrap();
        // linear map: deviation is pure roundoff
        assert!(report.jac_c_dev <= 1e-9, "{report:?}");
    }

    #[test]
    fn adjoint_consistency_random_problem() {
        let p = random_qp_problem(8, 4, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        for _ in 0..100 {
            let v = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
            let w = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
            let lhs = p.metric_x().inner(&jac_c_adjoint_apply(&p, &x, &v).unwrap(), &w);
            // <v, c'(x) w>_Y with the second argument in dual coordinates
            // reduces to a plain dot product against the Riesz representative.
            let rhs = v.dot(&jac_c_apply(&p, &x, &w).unwrap());
            assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1.0));
        }
    }
}
