//! Augmented objective and augmented Lagrangian
//! `L(x, y) = φ(x) + (ρ/2)‖c(x)‖²_Y + <y, c(x)>_Y` with their gradients and
//! the descent identity of the projected flow.
//!
//! Constraint norms in metric spaces are evaluated through the Riesz
//! representative `c_R = G_Y⁻¹ c`, one Gram solve per evaluation. The
//! x-gradient is always evaluated at the shifted multiplier
//! `y + ρ c_R`; the augmentation operator `ρ A*A` is never formed.

use nalgebra::DVector;

use crate::boxes::project_tangent_cone;
use crate::error::{Result, SolverError};
use crate::flow::forward_euler_step;
use crate::problem::Problem;
use crate::space::PrimalDual;

/// Augmentation weight `ρ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugParams {
    pub rho: f64,
}

impl AugParams {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho >= 0.0) {
            return Err(SolverError::InvalidParameter("rho must be nonnegative".into()));
        }
        Ok(Self { rho })
    }
}

/// Riesz representative of the constraint residual at `x`.
pub fn constraint_riesz(problem: &dyn Problem, x: &DVector<f64>) -> DVector<f64> {
    problem.metric_y().gram_solve(&problem.constraint(x))
}

/// Shifted multiplier `y + ρ c_R(x)` in Riesz representation.
pub fn shifted_multiplier(z: &PrimalDual, problem: &dyn Problem, rho: f64) -> DVector<f64> {
    if rho == 0.0 {
        z.y.clone()
    } else {
        &z.y + rho * constraint_riesz(problem, &z.x)
    }
}

/// Augmented objective `φ(x) + (ρ/2)‖c(x)‖²_Y`.
pub fn phi_rho(x: &DVector<f64>, problem: &dyn Problem, rho: f64) -> f64 {
    let mut value = problem.phi(x);
    if rho != 0.0 {
        let c = problem.constraint(x);
        let norm = problem.metric_y().dual_norm(&c);
        value += 0.5 * rho * norm * norm;
    }
    value
}

/// Augmented Lagrangian `φ^ρ(x) + <y, c(x)>_Y`. With a Riesz-represented
/// dual, the pairing is the plain dot product against the dual coordinates.
pub fn lagrangian_rho(z: &PrimalDual, problem: &dyn Problem, rho: f64) -> f64 {
    let c = problem.constraint(&z.x);
    let mut value = problem.phi(&z.x) + z.y.dot(&c);
    if rho != 0.0 {
        let norm = problem.metric_y().dual_norm(&c);
        value += 0.5 * rho * norm * norm;
    }
    value
}

/// Coordinate (dual) gradient of the augmented Lagrangian in `x`:
/// `φ'(x) + A(x)^T (y + ρ c_R)`.
pub fn grad_x_l_rho_dual(z: &PrimalDual, problem: &dyn Problem, rho: f64) -> Result<DVector<f64>> {
    if z.x.len() != problem.dim_x() {
        return Err(SolverError::DimensionMismatch { expected: problem.dim_x(), got: z.x.len() });
    }
    let y_tilde = shifted_multiplier(z, problem, rho);
    let at_y = problem.jac_c(&z.x).apply_transpose(&y_tilde)?;
    Ok(problem.grad_phi_dual(&z.x) + at_y)
}

/// Metric gradient `∇_x L(x, y) = G_X⁻¹ [φ'(x) + A^T(y + ρ c_R)]`.
pub fn grad_x_l_rho(z: &PrimalDual, problem: &dyn Problem, rho: f64) -> Result<DVector<f64>> {
    Ok(problem.metric_x().gram_solve(&grad_x_l_rho_dual(z, problem, rho)?))
}

/// Dual gradient `∇_y L(x, y) = c(x)`, returned in Riesz representation.
pub fn grad_y_l_rho(z: &PrimalDual, problem: &dyn Problem) -> DVector<f64> {
    constraint_riesz(problem, &z.x)
}

/// Time derivative of `L` along the projected flow, evaluated two ways:
/// a finite-difference probe across one explicit flow step of size `h`, and
/// the closed form `-‖P_T(-∇_x L)‖²_X + ‖c‖²_Y`.
pub fn dldt_identity(
    z: &PrimalDual,
    problem: &dyn Problem,
    rho: f64,
    h: f64,
) -> Result<(f64, f64)> {
    let grad = grad_x_l_rho(z, problem, rho)?;
    let projected = project_tangent_cone(&(-&grad), &z.x, problem)?;
    let stat = problem.metric_x().norm(&projected);
    let c = problem.constraint(&z.x);
    let feas = problem.metric_y().dual_norm(&c);
    let rhs = -stat * stat + feas * feas;

    let z_next = forward_euler_step(z, h, problem, rho)?;
    let lhs_fd = (lagrangian_rho(&z_next, problem, rho) - lagrangian_rho(z, problem, rho)) / h;
    Ok((lhs_fd, rhs))
}
