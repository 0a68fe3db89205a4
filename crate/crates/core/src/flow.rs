//! Explicit integration of the projected gradient/antigradient flow
//! `ẋ = P_T(C,x)(-∇_x L)`, `ẏ = c(x)`, with Lyapunov-style monitor
//! channels, plus the primal-dual Newton flow used for comparison.
//!
//! Forward Euler is deliberate here: the module exists for validation and
//! figure-style reproductions, not production integration.

use nalgebra::{Complex, DMatrix, DVector};

use crate::aug_lagrangian::{constraint_riesz, grad_x_l_rho, lagrangian_rho, shifted_multiplier};
use crate::boxes::{project_box, project_tangent_cone};
use crate::error::{Result, SolverError};
use crate::linalg::DenseLu;
use crate::problem::Problem;
use crate::space::PrimalDual;

/// One explicit step of the projected flow:
/// `x⁺ = P_C(x - h ∇_x L)`, `y⁺ = y + h c_R(x)`.
pub fn forward_euler_step(
    z: &PrimalDual,
    h: f64,
    problem: &dyn Problem,
    rho: f64,
) -> Result<PrimalDual> {
    if !(h > 0.0) {
        return Err(SolverError::InvalidParameter("step size must be positive".into()));
    }
    // membership check via the tangent-cone machinery's tolerance
    project_tangent_cone(&DVector::zeros(z.x.len()), &z.x, problem)?;
    let grad = grad_x_l_rho(z, problem, rho)?;
    let x_next = project_box(&(&z.x - h * grad), problem);
    let y_next = &z.y + h * constraint_riesz(problem, &z.x);
    Ok(PrimalDual::new(x_next, y_next))
}

/// Options for [`integrate_flow`].
#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    pub h: f64,
    pub t_final: f64,
    pub rho: f64,
    /// Monitor weight on the constraint-decay condition.
    pub gamma1: f64,
    pub gamma2: f64,
    /// Optional exponential-decay monitor rate; the corresponding channel is
    /// only filled when set.
    pub gamma3: Option<f64>,
    /// Record every n-th step (1 = every step). The final state is always
    /// recorded.
    pub record_every: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            h: 1e-3,
            t_final: 10.0,
            rho: 0.0,
            gamma1: 0.5,
            gamma2: 0.5,
            gamma3: None,
            record_every: 1,
        }
    }
}

/// Time series produced by [`integrate_flow`]. Channels carry the augmented
/// Lagrangian, the constraint norm, the projected-gradient norm, and the
/// slacks of the two descent conditions (nonnegative where satisfied).
/// Derivative-based slacks use one-sided differences between consecutive
/// recorded steps and are NaN at the first record.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<PrimalDual>,
    pub l_rho: Vec<f64>,
    pub norm_c: Vec<f64>,
    pub stat_res: Vec<f64>,
    pub slack_l: Vec<f64>,
    pub slack_c: Vec<f64>,
    pub slack_gronwall: Vec<f64>,
}

impl FlowTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal(&self) -> &PrimalDual {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn max_norm_c(&self) -> f64 {
        self.norm_c.iter().copied().fold(0.0, f64::max)
    }

    /// Writes the trajectory as CSV with one row per record.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let n_x = self.states[0].x.len();
        let n_y = self.states[0].y.len();
        let mut header = String::from("t");
        for i in 0..n_x {
            header.push_str(&format!(",x{i}"));
        }
        for i in 0..n_y {
            header.push_str(&format!(",y{i}"));
        }
        header.push_str(",L_rho,norm_c,stat_res,slack_L,slack_c");
        if !self.slack_gronwall.is_empty() {
            header.push_str(",slack_gronwall");
        }
        writeln!(out, "{header}")?;
        for k in 0..self.len() {
            let mut row = format!("{:.16e}", self.times[k]);
            for v in self.states[k].x.iter() {
                row.push_str(&format!(",{v:.16e}"));
            }
            for v in self.states[k].y.iter() {
                row.push_str(&format!(",{v:.16e}"));
            }
            row.push_str(&format!(
                ",{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.l_rho[k], self.norm_c[k], self.stat_res[k], self.slack_l[k], self.slack_c[k]
            ));
            if !self.slack_gronwall.is_empty() {
                row.push_str(&format!(",{:.16e}", self.slack_gronwall[k]));
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }
}

/// Integrates the projected flow by forward Euler, recording monitor
/// channels. Monitor violations are recorded, never fatal; a non-finite
/// state aborts with an error naming the blowup time.
pub fn integrate_flow(
    z0: &PrimalDual,
    problem: &dyn Problem,
    opts: &FlowOptions,
) -> Result<FlowTrajectory> {
    if !(opts.h > 0.0) || !(opts.t_final > 0.0) {
        return Err(SolverError::InvalidParameter("h and t_final must be positive".into()));
    }
    let record_every = opts.record_every.max(1);
    let n_steps = (opts.t_final / opts.h).round() as usize;

    let mut traj = FlowTrajectory {
        times: Vec::new(),
        states: Vec::new(),
        l_rho: Vec::new(),
        norm_c: Vec::new(),
        stat_res: Vec::new(),
        slack_l: Vec::new(),
        slack_c: Vec::new(),
        slack_gronwall: if opts.gamma3.is_some() { Vec::new() } else { Vec::new() },
    };

    let record = |traj: &mut FlowTrajectory, t: f64, z: &PrimalDual| -> Result<()> {
        let grad = grad_x_l_rho(z, problem, opts.rho)?;
        let projected = project_tangent_cone(&(-&grad), &z.x, problem)?;
        let stat = problem.metric_x().norm(&projected);
        let c = problem.constraint(&z.x);
        let nc = problem.metric_y().dual_norm(&c);
        let l = lagrangian_rho(z, problem, opts.rho);
        let k = traj.times.len();
        let (slack_l, slack_c, slack_g) = if k == 0 {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let dt = t - traj.times[k - 1];
            let dldt = (l - traj.l_rho[k - 1]) / dt;
            let dc2dt = 0.5 * (nc * nc - traj.norm_c[k - 1] * traj.norm_c[k - 1]) / dt;
            let slack_l = -dldt;
            let slack_c = -dldt - opts.gamma2 * nc * nc - opts.gamma1 * dc2dt;
            let slack_g = opts
                .gamma3
                .map(|g3| -dc2dt - g3 * nc * nc)
                .unwrap_or(f64::NAN);
            (slack_l, slack_c, slack_g)
        };
        traj.times.push(t);
        traj.states.push(z.clone());
        traj.l_rho.push(l);
        traj.norm_c.push(nc);
        traj.stat_res.push(stat);
        traj.slack_l.push(slack_l);
        traj.slack_c.push(slack_c);
        if opts.gamma3.is_some() {
            traj.slack_gronwall.push(slack_g);
        }
        Ok(())
    };

    let mut z = z0.clone();
    record(&mut traj, 0.0, &z)?;
    for step in 1..=n_steps {
        z = forward_euler_step(&z, opts.h, problem, opts.rho)?;
        if !z.is_finite() {
            return Err(SolverError::InnerSolve(format!(
                "flow state became non-finite at t = {:.6e}",
                step as f64 * opts.h
            )));
        }
        if step % record_every == 0 || step == n_steps {
            record(&mut traj, step as f64 * opts.h, &z)?;
        }
    }
    if opts.gamma3.is_none() {
        traj.slack_gronwall.clear();
    }
    Ok(traj)
}

/// Eigenvalue pair `½(±sqrt((ρ+1)(ρ-3)) + 1 - ρ)` of the linearized flow of
/// the scalar benchmark, with the complex square root.
pub fn linearized_spectrum_scalar(rho: f64) -> (Complex<f64>, Complex<f64>) {
    let disc = Complex::new((rho + 1.0) * (rho - 3.0), 0.0);
    let root = disc.sqrt();
    let base = Complex::new(1.0 - rho, 0.0);
    (0.5 * (base + root), 0.5 * (base - root))
}

/// One step of the primal-dual Newton flow
/// `ż = -[∇²L(z)]⁻¹ ∇L(z)` for unconstrained problems with identity
/// metrics. Errors carry the current iterate when the Hessian of the
/// stationarity system is (near-)singular.
pub fn newton_flow_step(
    z: &PrimalDual,
    h: f64,
    problem: &dyn Problem,
    rho: f64,
) -> Result<PrimalDual> {
    if !(h > 0.0) {
        return Err(SolverError::InvalidParameter("step size must be positive".into()));
    }
    if !problem.metric_x().is_identity() || !problem.metric_y().is_identity() {
        return Err(SolverError::InvalidParameter(
            "newton flow requires identity metrics".into(),
        ));
    }
    if (0..problem.dim_x()).any(|i| problem.bounds().is_bounded(i)) {
        return Err(SolverError::InvalidParameter(
            "newton flow requires an unconstrained problem".into(),
        ));
    }
    let n_x = problem.dim_x();
    let n_y = problem.dim_y();
    let n = n_x + n_y;

    let y_tilde = shifted_multiplier(z, problem, rho);
    let h_xx = problem.hess_lagrangian(&z.x, &y_tilde).to_dense();
    let a = problem.jac_c(&z.x).to_dense();
    let mut full = DMatrix::zeros(n, n);
    // ∇²_xx of the augmented Lagrangian: H(x, y + ρc) + ρ AᵀA
    let aug = &h_xx + rho * a.transpose() * &a;
    full.view_mut((0, 0), (n_x, n_x)).copy_from(&aug);
    full.view_mut((0, n_x), (n_x, n_y)).copy_from(&a.transpose());
    full.view_mut((n_x, 0), (n_y, n_x)).copy_from(&a);

    let grad_x = grad_x_l_rho(z, problem, rho)?;
    let c = problem.constraint(&z.x);
    let mut grad = DVector::zeros(n);
    grad.rows_mut(0, n_x).copy_from(&grad_x);
    grad.rows_mut(n_x, n_y).copy_from(&c);

    let lu = DenseLu::new(&full).map_err(|_| singular_err(z))?;
    let (min_piv, max_piv) = lu.pivot_range();
    if min_piv <= 1e-12 * max_piv {
        return Err(singular_err(z));
    }
    let d = lu.solve(&grad);
    if !d.iter().all(|v| v.is_finite()) {
        return Err(singular_err(z));
    }
    Ok(PrimalDual::new(
        &z.x - h * d.rows(0, n_x),
        &z.y - h * d.rows(n_x, n_y),
    ))
}

fn singular_err(z: &PrimalDual) -> SolverError {
    SolverError::InnerSolve(format!(
        "newton flow: singular stationarity Hessian at x = {:?}",
        z.x.as_slice()
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{nonconvex_qp_problem, pendulum_problem, scalar_problem};
    use crate::space::z_norm;
    use approx::assert_relative_eq;

    #[test]
    fn euler_step_hand_value() {
        let p = pendulum_problem();
        let z = PrimalDual::from_slices(&[0.01, 1.0], &[-0.5]);
        let next = forward_euler_step(&z, 0.1, &p, 0.0).unwrap();
        assert_relative_eq!(next.x[0], 0.011, epsilon = 1e-15);
        assert_relative_eq!(next.x[1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(next.y[0], -0.5 + 0.1 * 1e-4, epsilon = 1e-15);
    }

    #[test]
    fn critical_point_is_equilibrium() {
        let p = pendulum_problem();
        let z = PrimalDual::from_slices(&[0.0, -1.0], &[0.5]);
        for rho in [0.0, 1.0, 10.0] {
            let next = forward_euler_step(&z, 0.05, &p, rho).unwrap();
            assert!(z_norm(&next.sub(&z), &p).unwrap() <= 1e-12);
        }
        // perturbed points move
        let z = PrimalDual::from_slices(&[0.05, -1.0], &[0.5]);
        let next = forward_euler_step(&z, 0.05, &p, 1.0).unwrap();
        assert!(z_norm(&next.sub(&z), &p).unwrap() > 1e-6);
    }

    #[test]
    fn projected_branch_of_nonconvex_qp() {
        let q = nonconvex_qp_problem();
        // at the lower bound x2 = 0 with inward flow direction the step
        // follows max(0, x2); outward directions are clipped by P_C
        let z = PrimalDual::from_slices(&[0.0, 1.0], &[0.0]);
        let next = forward_euler_step(&z, 0.1, &q, 0.0).unwrap();
        assert_relative_eq!(next.x[1], 1.1, epsilon = 1e-15);
        let z = PrimalDual::from_slices(&[0.3, 0.0], &[0.0]);
        let next = forward_euler_step(&z, 0.1, &q, 0.5).unwrap();
        assert_eq!(next.x[1], 0.0);
    }

    #[test]
    fn pendulum_flow_reaches_minimum() {
        let p = pendulum_problem();
        let z0 = PrimalDual::from_slices(&[0.01, 1.0], &[-0.5]);
        let mut max_c = Vec::new();
        for rho in [1.0, 10.0] {
            let opts = FlowOptions {
                h: 1e-3,
                t_final: 50.0,
                rho,
                record_every: 10,
                ..FlowOptions::default()
            };
            let traj = integrate_flow(&z0, &p, &opts).unwrap();
            let zstar = PrimalDual::from_slices(&[0.0, -1.0], &[0.5]);
            let err = z_norm(&traj.terminal().sub(&zstar), &p).unwrap();
            // the dual still drifts at t = 50 for the stiffer run
            let tol = if rho == 1.0 { 1e-2 } else { 2e-2 };
            assert!(err <= tol, "rho {rho}: terminal error {err}");
            max_c.push(traj.max_norm_c());
        }
        assert!(max_c[1] < max_c[0], "larger rho should track the feasible set closer");
    }

    #[test]
    fn constant_trajectory_at_critical_point() {
        let p = pendulum_problem();
        let z0 = PrimalDual::from_slices(&[0.0, -1.0], &[0.5]);
        let opts = FlowOptions { h: 1e-2, t_final: 1.0, rho: 1.0, ..FlowOptions::default() };
        let traj = integrate_flow(&z0, &p, &opts).unwrap();
        let err = z_norm(&traj.terminal().sub(&z0), &p).unwrap();
        assert!(err <= 1e-12);
    }

    #[test]
    fn scalar_flow_stability_threshold() {
        let s = scalar_problem();
        let z0 = PrimalDual::from_slices(&[1.0], &[0.0]);
        let norms: Vec<f64> = [0.5, 2.0]
            .iter()
            .map(|&rho| {
                let opts =
                    FlowOptions { h: 1e-3, t_final: 20.0, rho, record_every: 100, ..FlowOptions::default() };
                let traj = integrate_flow(&z0, &s, &opts).unwrap();
                z_norm(traj.terminal(), &s).unwrap()
            })
            .collect();
        assert!(norms[0] > 1.0, "rho = 0.5 must be unstable, |z| = {}", norms[0]);
        assert!(norms[1] < 1.0, "rho = 2 must be stable, |z| = {}", norms[1]);
    }

    #[test]
    fn spectrum_formula_values() {
        let (m1, m2) = linearized_spectrum_scalar(3.0);
        assert_relative_eq!(m1.re, -1.0, epsilon = 1e-14);
        assert_relative_eq!(m2.re, -1.0, epsilon = 1e-14);
        assert_relative_eq!(m1.im, 0.0, epsilon = 1e-14);

        let (m1, m2) = linearized_spectrum_scalar(0.0);
        assert_relative_eq!(m1.re, 0.5, epsilon = 1e-14);
        assert_relative_eq!(m2.re, 0.5, epsilon = 1e-14);
        assert!(m1.im != 0.0);

        let (m1, m2) = linearized_spectrum_scalar(100.0);
        assert!(m1.re < 0.0 && m1.re > -2e-2, "slow eigenvalue approaches zero: {m1}");
        assert!(m2.re < -90.0, "fast eigenvalue diverges: {m2}");
    }

    #[test]
    fn newton_flow_prefers_the_maximum() {
        let p = pendulum_problem();
        let mut z = PrimalDual::from_slices(&[0.01, 1.0], &[-0.5]);
        for _ in 0..2000 {
            z = newton_flow_step(&z, 0.01, &p, 1.0).unwrap();
        }
        let zmax = PrimalDual::from_slices(&[0.0, 1.0], &[-0.5]);
        assert!(z_norm(&z.sub(&zmax), &p).unwrap() <= 1e-6);
        // critical points are fixed
        let next = newton_flow_step(&zmax, 0.01, &p, 1.0).unwrap();
        assert!(z_norm(&next.sub(&zmax), &p).unwrap() <= 1e-12);
    }

    #[test]
    fn newton_flow_singular_circle() {
        let p = pendulum_problem();
        let r = 1.5f64.sqrt();
        let z = PrimalDual::from_slices(&[r, 0.0], &[-0.5]);
        assert!(newton_flow_step(&z, 0.01, &p, 1.0).is_err());
    }

    #[test]
    fn euler_refinement_order() {
        let p = pendulum_problem();
        let z0 = PrimalDual::from_slices(&[0.01, 1.0], &[-0.5]);
        let run = |h: f64| {
            let opts = FlowOptions { h, t_final: 5.0, rho: 1.0, record_every: 1 << 20, ..FlowOptions::default() };
            integrate_flow(&z0, &p, &opts).unwrap().terminal().clone()
        };
        let t1 = run(2e-3);
        let t2 = run(1e-3);
        let t3 = run(5e-4);
        let r = z_norm(&t1.sub(&t2), &p).unwrap() / z_norm(&t2.sub(&t3), &p).unwrap();
        let order = r.log2();
        assert!(order >= 0.9, "observed order {order}");
    }
}
