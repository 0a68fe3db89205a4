//! Driver-level integration tests: termination soundness, saddle escape of
//! the explicit flow, subproblem diagnostics along the homotopy, and local
//! superlinear behavior.

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use seqhom::benchmarks::pendulum_problem;
use seqhom::flow::{integrate_flow, FlowOptions};
use seqhom::homotopy::{solve, solve_subproblem, DriverParams};
use seqhom::subproblem::{newton_step, prox_problem_value, Counters, ProxParams};
use seqhom::{criticality_residual, z_norm, PrimalDual, SolveStatus};

#[test]
fn termination_soundness() {
    let problem = pendulum_problem();
    let params = DriverParams { rho: 1.0, ..DriverParams::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    for _ in 0..20 {
        let z0 = PrimalDual::from_slices(
            &[rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)],
            &[rng.random_range(-1.0..1.0)],
        );
        let result = solve(&problem, &z0, &params).unwrap();
        if result.status == SolveStatus::Solved {
            let (stat, feas) = criticality_residual(&result.z, &problem, params.rho).unwrap();
            assert!(stat <= 10.0 * params.tol, "stat residual {stat:.2e} after solve");
            assert!(feas <= 10.0 * params.tol, "feas residual {feas:.2e} after solve");
        }
    }
}

#[test]
fn flow_escapes_the_saddle() {
    let problem = pendulum_problem();
    let zmax = PrimalDual::from_slices(&[0.0, 1.0], &[-0.5]);
    let zmin = PrimalDual::from_slices(&[0.0, -1.0], &[0.5]);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut d = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
    d *= 1e-2 / d.norm();
    let z0 = PrimalDual::from_slices(&[d[0], 1.0 + d[1]], &[-0.5 + d[2]]);

    let opts = FlowOptions { h: 1e-3, t_final: 60.0, rho: 1.0, record_every: 10, ..FlowOptions::default() };
    let traj = integrate_flow(&z0, &problem, &opts).unwrap();
    let mut left_ball = false;
    let mut entered_min = false;
    for state in &traj.states {
        if z_norm(&state.sub(&zmax), &problem).unwrap() > 0.5 {
            left_ball = true;
        }
        if left_ball && z_norm(&state.sub(&zmin), &problem).unwrap() < 1e-2 {
            entered_min = true;
            break;
        }
    }
    assert!(left_ball, "trajectory never escaped the saddle neighborhood");
    assert!(entered_min, "trajectory did not reach the minimum");
}

#[test]
fn prox_value_decreases_along_homotopy() {
    let problem = pendulum_problem();
    let zhat = PrimalDual::from_slices(&[0.01, 1.0], &[-0.5]);
    let mut values = Vec::new();
    for lambda in [1.0, 0.1, 0.01] {
        let z = solve_subproblem(&problem, &zhat, lambda, 1.0, 1e-13).unwrap();
        let prox = ProxParams::new(lambda, 1.0, zhat.clone()).unwrap();
        values.push(prox_problem_value(&z, &prox, &problem).unwrap());
    }
    assert!(values[1] < values[0] && values[2] < values[1], "values {values:?}");
}

#[test]
fn local_superlinear_tail() {
    // plain Newton at lambda = 0 from near the minimum: error ratios fall
    let problem = pendulum_problem();
    let zstar = PrimalDual::from_slices(&[0.0, -1.0], &[0.5]);
    let mut z = PrimalDual::from_slices(&[0.05, -0.98], &[0.45]);
    let prox = ProxParams::new(0.0, 0.0, z.clone()).unwrap();
    let mut counters = Counters::default();
    let mut errors = Vec::new();
    for _ in 0..6 {
        errors.push(z_norm(&z.sub(&zstar), &problem).unwrap());
        let (next, _) = newton_step(&z, &prox, &problem, &mut counters).unwrap();
        z = next;
    }
    let mut ratios = Vec::new();
    for k in 0..errors.len() - 1 {
        if errors[k] > 1e-14 && errors[k + 1] > 1e-16 {
            ratios.push(errors[k + 1] / errors[k]);
        }
    }
    assert!(ratios.len() >= 3, "need at least three usable ratios, got {ratios:?}");
    for k in 0..ratios.len() - 1 {
        assert!(
            ratios[k + 1] < ratios[k],
            "error ratios must fall towards zero: {ratios:?}"
        );
    }
    assert!(*ratios.last().unwrap() < 1e-2, "quadratic tail missing: {ratios:?}");
}

#[test]
fn warns_and_projects_infeasible_start() {
    use seqhom::benchmarks::nonconvex_qp_problem;
    let problem = nonconvex_qp_problem();
    // start below the x2 >= 0 bound
    let z0 = PrimalDual::from_slices(&[0.2, -1.0], &[0.1]);
    let params = DriverParams { rho: 1.0, max_outer: 30, ..DriverParams::default() };
    let result = solve(&problem, &z0, &params).unwrap();
    assert!(result
        .log
        .warnings
        .iter()
        .any(|w| w.contains("projected")));
}
