//! Residual, semismooth Newton step, and simplified Newton step for the
//! projected backward-Euler system
//!
//! ```text
//!   x - P_C(x̂ - Δt ∇_x L(x, y)) = 0,      y - ŷ - Δt c(x) = 0,
//! ```
//!
//! scaled by `λ = 1/Δt`. The Newton systems avoid the augmentation operator
//! `ρ A*A` through the shifted-multiplier reformulation
//!
//! ```text
//!   [ λ G_X + H   A^T              ] [δx ]    [ F₁ + λ G_X (x - x̂)            ]
//!   [ A           -(1+ρλ)⁻¹ λ G_Y  ] [δỹ ] = -[ (1+ρλ)⁻¹ (F₂ - λ G_Y (y - ŷ))]
//! ```
//!
//! with `H = ∇²L⁰(x, y + ρ c_R)` and the multiplier increment recovered as
//! `δy = (1+ρλ)⁻¹ (δỹ + ρ F₂ - ρλ(y - ŷ))`. Coordinates at active bounds,
//! classified from the projector argument, replace their primal rows by
//! bound-pinning identity rows.

use nalgebra::DVector;

use crate::aug_lagrangian::{constraint_riesz, phi_rho};
use crate::boxes::{project_box, ActiveSet, BoundStatus};
use crate::error::{Result, SolverError};
use crate::linalg::{factorize, Factorization, SparseMatrix, Triplets};
use crate::problem::Problem;
use crate::space::PrimalDual;

/// Proximal subproblem data: `λ = 1/Δt`, augmentation weight, and the
/// reference point the step starts from.
#[derive(Debug, Clone)]
pub struct ProxParams {
    pub lambda: f64,
    pub rho: f64,
    pub zhat: PrimalDual,
}

impl ProxParams {
    pub fn new(lambda: f64, rho: f64, zhat: PrimalDual) -> Result<Self> {
        if !(lambda >= 0.0) || !(rho >= 0.0) {
            return Err(SolverError::InvalidParameter("lambda and rho must be nonnegative".into()));
        }
        Ok(Self { lambda, rho, zhat })
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.lambda
    }
}

/// Work counters in the style of matrix/residual evaluation counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub mat_evals: u64,
    pub res_evals: u64,
    pub discarded: u64,
}

/// Backward-Euler residual, first block an X-vector, second block a dual
/// vector in Riesz representation.
#[derive(Debug, Clone)]
pub struct BeResidual {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

impl BeResidual {
    pub fn z_norm(&self, problem: &dyn Problem) -> f64 {
        let nx = problem.metric_x().norm(&self.x);
        let ny = problem.metric_y().norm(&self.y);
        (nx * nx + ny * ny).sqrt()
    }
}

/// Evaluation of all state-dependent quantities a Newton right-hand side
/// needs; one of these per residual evaluation.
struct Evaluation {
    c_dual: DVector<f64>,
    c_riesz: DVector<f64>,
    /// Dual-coordinate gradient of the augmented Lagrangian in x.
    grad_dual: DVector<f64>,
    /// Projector argument `x̂ - (1/λ) ∇_x L`.
    projector_arg: DVector<f64>,
}

fn evaluate(z: &PrimalDual, prox: &ProxParams, problem: &dyn Problem) -> Result<Evaluation> {
    let c_dual = problem.constraint(&z.x);
    let c_riesz = problem.metric_y().gram_solve(&c_dual);
    let y_tilde = &z.y + prox.rho * &c_riesz;
    let at_y = problem.jac_c(&z.x).apply_transpose(&y_tilde)?;
    let grad_dual = problem.grad_phi_dual(&z.x) + at_y;
    let grad = problem.metric_x().gram_solve(&grad_dual);
    let projector_arg = if prox.lambda > 0.0 {
        &prox.zhat.x - grad / prox.lambda
    } else {
        // direct lambda = 0 calls are limited to bound-free problems; an
        // all-NaN argument classifies every coordinate as inactive
        DVector::from_element(z.x.len(), f64::NAN)
    };
    Ok(Evaluation { c_dual, c_riesz, grad_dual, projector_arg })
}

/// Scaled backward-Euler residual
/// `(λ [x - P_C(x̂ - ∇_x L / λ)], λ (y - ŷ) - c_R)`.
pub fn backward_euler_residual(
    z: &PrimalDual,
    prox: &ProxParams,
    problem: &dyn Problem,
) -> Result<BeResidual> {
    if !(prox.lambda > 0.0) {
        return Err(SolverError::InvalidParameter(
            "backward-Euler residual requires lambda > 0".into(),
        ));
    }
    let eval = evaluate(z, prox, problem)?;
    Ok(residual_from_eval(z, prox, problem, &eval))
}

fn residual_from_eval(
    z: &PrimalDual,
    prox: &ProxParams,
    problem: &dyn Problem,
    eval: &Evaluation,
) -> BeResidual {
    let projected = project_box(&eval.projector_arg, problem);
    let r_x = prox.lambda * (&z.x - projected);
    let r_y = prox.lambda * (&z.y - &prox.zhat.y) - &eval.c_riesz;
    BeResidual { x: r_x, y: r_y }
}

/// Assembled two-block system with active-set pinning and a cached
/// factorization.
pub struct KktSystem {
    /// Symmetric blocks before pinning; rows of active coordinates are
    /// replaced by identity rows in the factorized matrix.
    unpinned: SparseMatrix,
    pub active: ActiveSet,
    factor: Factorization,
    pub lambda: f64,
    pub rho: f64,
    n_x: usize,
    n_y: usize,
}

impl KktSystem {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.unpinned
    }

    pub fn dim(&self) -> usize {
        self.n_x + self.n_y
    }

    /// Quadratic form of the proximal Hessian along a primal direction:
    /// `<dx, (λ G_X + H) dx> + ρ ‖A dx‖²_Y`. Negative values flag that the
    /// step tracks a stationary point which is not a proximal minimizer.
    pub fn primal_curvature(&self, dx: &DVector<f64>, problem: &dyn Problem) -> Result<f64> {
        let mut padded = DVector::zeros(self.dim());
        padded.rows_mut(0, self.n_x).copy_from(dx);
        let product = self.unpinned.apply(&padded)?;
        let quad = dx.dot(&product.rows(0, self.n_x).into_owned());
        let a_dx = product.rows(self.n_x, self.n_y).into_owned();
        let a_norm = problem.metric_y().dual_norm(&a_dx);
        Ok(quad + self.rho * a_norm * a_norm)
    }

    fn pin_and_factor(unpinned: &SparseMatrix, active: &ActiveSet, n_x: usize) -> Result<Factorization> {
        let mut t = Triplets::with_capacity(unpinned.nrows(), unpinned.ncols(), unpinned.nnz());
        for col in 0..unpinned.ncols() {
            for (row, val) in unpinned.col_iter(col) {
                if row < n_x && active.status(row) != BoundStatus::Inactive {
                    if row == col {
                        t.push(row, col, 1.0);
                    }
                } else {
                    t.push(row, col, val);
                }
            }
        }
        factorize(&t.compress())
    }

    /// Replaces the active set, reusing the factorization when unchanged.
    fn repin(&mut self, active: ActiveSet) -> Result<()> {
        if active != self.active {
            self.factor = Self::pin_and_factor(&self.unpinned, &active, self.n_x)?;
            self.active = active;
        }
        Ok(())
    }

    fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        self.factor.solve(rhs)
    }
}

/// Builds the two-block system at `z`, classifying the active set from the
/// projector argument. Fails with a singularity error when the pinned
/// matrix cannot be factorized, which the outer loop answers by raising
/// `λ`.
pub fn assemble_kkt(
    z: &PrimalDual,
    prox: &ProxParams,
    problem: &dyn Problem,
) -> Result<KktSystem> {
    check_lambda_for_steps(prox, problem)?;
    let eval = evaluate(z, prox, problem)?;
    assemble_kkt_from_eval(z, prox, problem, &eval)
}

/// `lambda = 0` is allowed as a direct call only without box constraints;
/// bounded problems reach small stepsizes through the homotopy instead.
fn check_lambda_for_steps(prox: &ProxParams, problem: &dyn Problem) -> Result<()> {
    if prox.lambda == 0.0 && (0..problem.dim_x()).any(|i| problem.bounds().is_bounded(i)) {
        return Err(SolverError::InvalidParameter(
            "lambda = 0 steps require a bound-free problem".into(),
        ));
    }
    Ok(())
}

fn assemble_kkt_from_eval(
    z: &PrimalDual,
    prox: &ProxParams,
    problem: &dyn Problem,
    eval: &Evaluation,
) -> Result<KktSystem> {
    let n_x = problem.dim_x();
    let n_y = problem.dim_y();
    let lambda = prox.lambda;
    let rho = prox.rho;

    let y_tilde = &z.y + rho * &eval.c_riesz;
    let hess = problem.hess_lagrangian(&z.x, &y_tilde);
    let jac = problem.jac_c(&z.x);
    let gram_x = problem.metric_x().gram_matrix();
    let gram_y = problem.metric_y().gram_matrix();

    let cap = hess.nnz() + gram_x.nnz() + 2 * jac.nnz() + gram_y.nnz();
    let mut t = Triplets::with_capacity(n_x + n_y, n_x + n_y, cap);
    t.push_block(0, 0, &hess, 1.0);
    t.push_block(0, 0, &gram_x, lambda);
    t.push_block_transposed(0, n_x, &jac, 1.0);
    t.push_block(n_x, 0, &jac, 1.0);
    t.push_block(n_x, n_x, &gram_y, -lambda / (1.0 + rho * lambda));
    let unpinned = t.compress();

    let active = ActiveSet::from_projector_argument(&eval.projector_arg, problem.bounds());
    let factor = KktSystem::pin_and_factor(&unpinned, &active, n_x)?;
    Ok(KktSystem { unpinned, active, factor, lambda, rho, n_x, n_y })
}

/// Right-hand side at an evaluation point for the system pinned by
/// `active`.
fn build_rhs(
    z: &PrimalDual,
    prox: &ProxParams,
    problem: &dyn Problem,
    eval: &Evaluation,
    active: &ActiveSet,
) -> DVector<f64> {
    let n_x = problem.dim_x();
    let n_y = problem.dim_y();
    let lambda = prox.lambda;
    let rho = prox.rho;
    let mut rhs = DVector::zeros(n_x + n_y);

    let gx_step = problem.metric_x().gram_apply(&(&z.x - &prox.zhat.x));
    for i in 0..n_x {
        rhs[i] = -(eval.grad_dual[i] + lambda * gx_step[i]);
    }
    let bounds = problem.bounds();
    for (i, status) in active.iter_active() {
        let bound = match status {
            BoundStatus::AtLower => bounds.lower()[i],
            BoundStatus::AtUpper => bounds.upper()[i],
            BoundStatus::Inactive => unreachable!(),
        };
        rhs[i] = bound - z.x[i];
    }
    let gy_step = problem.metric_y().gram_apply(&(&z.y - &prox.zhat.y));
    let scale = 1.0 / (1.0 + rho * lambda);
    for i in 0..n_y {
        rhs[n_x + i] = -scale * (eval.c_dual[i] - lambda * gy_step[i]);
    }
    rhs
}

fn recover_increment(
    z: &PrimalDual,
    prox: &ProxParams,
    eval: &Evaluation,
    solution: &DVector<f64>,
    n_x: usize,
    n_y: usize,
) -> PrimalDual {
    let dx = solution.rows(0, n_x).into_owned();
    let dy_tilde = solution.rows(n_x, n_y).into_owned();
    let scale = 1.0 / (1.0 + prox.rho * prox.lambda);
    let dy = scale
        * (dy_tilde + prox.rho * &eval.c_riesz
            - prox.rho * prox.lambda * (&z.y - &prox.zhat.y));
    PrimalDual::new(dx, dy)
}

/// One semismooth Newton step from `z`. Returns the new iterate together
/// with the assembled system so a simplified step can reuse its blocks.
/// Counts one matrix and one residual evaluation.
pub fn newton_step(
    z: &PrimalDual,
    prox: &ProxParams,
    problem: &dyn Problem,
    counters: &mut Counters,
) -> Result<(PrimalDual, KktSystem)> {
    let (z_next, kkt, _) = newton_step_with_residual(z, prox, problem, counters)?;
    Ok((z_next, kkt))
}

/// As [`newton_step`], additionally reporting the backward-Euler residual
/// norm at `z`, computed from the same evaluation the step uses.
pub fn newton_step_with_residual(
    z: &PrimalDual,
    prox: &ProxParams,
    problem: &dyn Problem,
    counters: &mut Counters,
) -> Result<(PrimalDual, KktSystem, f64)> {
    check_lambda_for_steps(prox, problem)?;
    let eval = evaluate(z, prox, problem)?;
    counters.res_evals += 1;
    counters.mat_evals += 1;
    let res_norm = if prox.lambda > 0.0 {
        residual_from_eval(z, prox, problem, &eval).z_norm(problem)
    } else {
        f64::NAN
    };
    let kkt = assemble_kkt_from_eval(z, prox, problem, &eval)?;
    let rhs = build_rhs(z, prox, problem, &eval, &kkt.active);
    let solution = kkt.solve(&rhs)?;
    let delta = recover_increment(z, prox, &eval, &solution, kkt.n_x, kkt.n_y);
    Ok((z.axpy(1.0, &delta), kkt, res_norm))
}

/// One simplified semismooth Newton step from `z_plus`: the residual is
/// re-evaluated and the active set re-classified, but the `H` and `A`
/// blocks of the previous system are reused. Counts one residual
/// evaluation and no matrix evaluation.
pub fn simplified_newton_step(
    z_plus: &PrimalDual,
    kkt: &mut KktSystem,
    prox: &ProxParams,
    problem: &dyn Problem,
    counters: &mut Counters,
) -> Result<PrimalDual> {
    let (z_next, _) = simplified_newton_step_with_residual(z_plus, kkt, prox, problem, counters)?;
    Ok(z_next)
}

/// As [`simplified_newton_step`], additionally reporting the residual norm
/// at `z_plus`.
pub fn simplified_newton_step_with_residual(
    z_plus: &PrimalDual,
    kkt: &mut KktSystem,
    prox: &ProxParams,
    problem: &dyn Problem,
    counters: &mut Counters,
) -> Result<(PrimalDual, f64)> {
    let eval = evaluate(z_plus, prox, problem)?;
    counters.res_evals += 1;
    let res_norm = if prox.lambda > 0.0 {
        residual_from_eval(z_plus, prox, problem, &eval).z_norm(problem)
    } else {
        f64::NAN
    };
    let active = ActiveSet::from_projector_argument(&eval.projector_arg, problem.bounds());
    kkt.repin(active)?;
    let rhs = build_rhs(z_plus, prox, problem, &eval, &kkt.active);
    let solution = kkt.solve(&rhs)?;
    let delta = recover_increment(z_plus, prox, &eval, &solution, kkt.n_x, kkt.n_y);
    Ok((z_plus.axpy(1.0, &delta), res_norm))
}

/// Fixed-point map `Φ(z) = (P_C(x̂ - Δt ∇_x L(z)), ŷ + Δt c_R(x))`; its
/// fixed points are exactly the zeros of the backward-Euler residual.
pub fn fixpoint_map(z: &PrimalDual, prox: &ProxParams, problem: &dyn Problem) -> Result<PrimalDual> {
    if !(prox.lambda > 0.0) {
        return Err(SolverError::InvalidParameter("fixed-point map requires lambda > 0".into()));
    }
    let eval = evaluate(z, prox, problem)?;
    let x_next = project_box(&eval.projector_arg, problem);
    let y_next = &prox.zhat.y + &eval.c_riesz / prox.lambda;
    Ok(PrimalDual::new(x_next, y_next))
}

/// Diagnostic objective of the regularized problem at `(x, w(x))` with the
/// lifted variable eliminated through `w = -Δt c(x)`:
/// `φ^ρ(x) + λ [½ ‖x - x̂‖²_X + ½ ‖w - ŷ‖²_Y]`.
pub fn prox_problem_value(z: &PrimalDual, prox: &ProxParams, problem: &dyn Problem) -> Result<f64> {
    if !(prox.lambda > 0.0) {
        return Err(SolverError::InvalidParameter("prox value requires lambda > 0".into()));
    }
    let c_r = constraint_riesz(problem, &z.x);
    let w = -&c_r / prox.lambda;
    let dx = problem.metric_x().norm(&(&z.x - &prox.zhat.x));
    let dw = problem.metric_y().norm(&(&w - &prox.zhat.y));
    Ok(phi_rho(&z.x, problem, prox.rho) + prox.lambda * 0.5 * (dx * dx + dw * dw))
}
