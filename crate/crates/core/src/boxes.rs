//! Box sets, their tangent cones, and criticality residuals.
//!
//! Bounds use `±inf` sentinels for free coordinates, so projections are
//! exact clamps and the tangent cone of a box at a point is a sign
//! restriction per active coordinate.

use nalgebra::DVector;

use crate::aug_lagrangian::grad_x_l_rho;
use crate::error::{Result, SolverError};
use crate::problem::Problem;
use crate::space::PrimalDual;

/// Absolute tolerance for testing membership `x ∈ C`; clamped points always
/// pass, user-supplied points may carry noise of this size per coordinate.
pub const BOX_MEMBERSHIP_TOL: f64 = 1e-12;

/// Componentwise bounds with `±inf` for unbounded coordinates.
#[derive(Debug, Clone)]
pub struct BoxBounds {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl BoxBounds {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(SolverError::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        for i in 0..lower.len() {
            if lower[i].is_finite() && upper[i].is_finite() && lower[i] > upper[i] {
                return Err(SolverError::InvalidParameter(format!(
                    "lower bound exceeds upper bound in component {i}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn free(dim: usize) -> Self {
        Self {
            lower: DVector::from_element(dim, f64::NEG_INFINITY),
            upper: DVector::from_element(dim, f64::INFINITY),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    /// Whether any bound is finite in component `i`.
    pub fn is_bounded(&self, i: usize) -> bool {
        self.lower[i].is_finite() || self.upper[i].is_finite()
    }

    pub fn clamp(&self, i: usize, v: f64) -> f64 {
        v.max(self.lower[i]).min(self.upper[i])
    }
}

/// Per-coordinate activity of a point relative to its box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundStatus {
    Inactive,
    AtLower,
    AtUpper,
}

/// Active-set classification of the bounded coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    status: Vec<BoundStatus>,
}

impl ActiveSet {
    /// Classifies a feasible point: a coordinate counts as at a bound when
    /// `|x_i - bound| <= 1e-12 * max(1, |bound|)`.
    pub fn from_point(x: &DVector<f64>, bounds: &BoxBounds) -> Self {
        let status = (0..x.len())
            .map(|i| {
                let lo = bounds.lower[i];
                let up = bounds.upper[i];
                if lo.is_finite() && (x[i] - lo).abs() <= BOX_MEMBERSHIP_TOL * lo.abs().max(1.0) {
                    BoundStatus::AtLower
                } else if up.is_finite() && (x[i] - up).abs() <= BOX_MEMBERSHIP_TOL * up.abs().max(1.0)
                {
                    BoundStatus::AtUpper
                } else {
                    BoundStatus::Inactive
                }
            })
            .collect();
        Self { status }
    }

    /// Classifies from a projector argument `s`: a coordinate is active
    /// exactly when `s_i` falls outside its bounds. Ties (`s_i` exactly on a
    /// bound) classify as inactive.
    pub fn from_projector_argument(s: &DVector<f64>, bounds: &BoxBounds) -> Self {
        let status = (0..s.len())
            .map(|i| {
                if s[i] < bounds.lower[i] {
                    BoundStatus::AtLower
                } else if s[i] > bounds.upper[i] {
                    BoundStatus::AtUpper
                } else {
                    BoundStatus::Inactive
                }
            })
            .collect();
        Self { status }
    }

    pub fn status(&self, i: usize) -> BoundStatus {
        self.status[i]
    }

    pub fn len(&self) -> usize {
        self.status.len()
    }

    pub fn is_empty(&self) -> bool {
        self.status.is_empty()
    }

    pub fn n_active(&self) -> usize {
        self.status.iter().filter(|s| **s != BoundStatus::Inactive).count()
    }

    pub fn n_at_lower(&self) -> usize {
        self.status.iter().filter(|s| **s == BoundStatus::AtLower).count()
    }

    pub fn n_at_upper(&self) -> usize {
        self.status.iter().filter(|s| **s == BoundStatus::AtUpper).count()
    }

    pub fn iter_active(&self) -> impl Iterator<Item = (usize, BoundStatus)> + '_ {
        self.status
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, s)| *s != BoundStatus::Inactive)
    }
}

/// Exact projection of `v` onto the box of `problem`: componentwise clamp on
/// bounded coordinates, unbounded coordinates unchanged.
pub fn project_box(v: &DVector<f64>, problem: &dyn Problem) -> DVector<f64> {
    project_box_bounds(v, problem.bounds())
}

pub fn project_box_bounds(v: &DVector<f64>, bounds: &BoxBounds) -> DVector<f64> {
    DVector::from_fn(v.len(), |i, _| bounds.clamp(i, v[i]))
}

fn check_membership(x: &DVector<f64>, bounds: &BoxBounds) -> Result<()> {
    for i in 0..x.len() {
        let lo = bounds.lower[i];
        let up = bounds.upper[i];
        let tol_lo = BOX_MEMBERSHIP_TOL * lo.abs().max(1.0);
        let tol_up = BOX_MEMBERSHIP_TOL * up.abs().max(1.0);
        if x[i] < lo - tol_lo {
            return Err(SolverError::OutsideBox { index: i, violation: lo - x[i] });
        }
        if x[i] > up + tol_up {
            return Err(SolverError::OutsideBox { index: i, violation: x[i] - up });
        }
    }
    Ok(())
}

/// Projection of a direction `d` onto the tangent cone `T(C, x)` of the box
/// at `x ∈ C`: free where `x` is strictly interior, `max(d, 0)` at a lower
/// bound, `min(d, 0)` at an upper bound, zero at a degenerate bound.
pub fn project_tangent_cone(
    d: &DVector<f64>,
    x: &DVector<f64>,
    problem: &dyn Problem,
) -> Result<DVector<f64>> {
    project_tangent_cone_bounds(d, x, problem.bounds())
}

pub fn project_tangent_cone_bounds(
    d: &DVector<f64>,
    x: &DVector<f64>,
    bounds: &BoxBounds,
) -> Result<DVector<f64>> {
    check_membership(x, bounds)?;
    let active = ActiveSet::from_point(x, bounds);
    let mut out = d.clone();
    for i in 0..d.len() {
        match active.status(i) {
            BoundStatus::Inactive => {}
            BoundStatus::AtLower => {
                if bounds.lower[i] == bounds.upper[i] {
                    out[i] = 0.0;
                } else {
                    out[i] = d[i].max(0.0);
                }
            }
            BoundStatus::AtUpper => {
                if bounds.lower[i] == bounds.upper[i] {
                    out[i] = 0.0;
                } else {
                    out[i] = d[i].min(0.0);
                }
            }
        }
    }
    Ok(out)
}

/// Splits `d = d_tangent + d_polar` with `<d_tangent, d_polar> = 0`, the
/// unique decomposition into the tangent cone at `x` and its polar.
pub fn moreau_decompose(
    d: &DVector<f64>,
    x: &DVector<f64>,
    problem: &dyn Problem,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let tangent = project_tangent_cone(d, x, problem)?;
    let polar = d - &tangent;
    Ok((tangent, polar))
}

/// Criticality residual of a primal-dual point: the pair
/// `(‖P_T(-∇_x L)‖_X, ‖c(x)‖_Y)`. Both vanish exactly at critical points
/// with feasible `x`.
pub fn criticality_residual(
    z: &PrimalDual,
    problem: &dyn Problem,
    rho: f64,
) -> Result<(f64, f64)> {
    let grad = grad_x_l_rho(z, problem, rho)?;
    let projected = project_tangent_cone(&(-&grad), &z.x, problem)?;
    let stat = problem.metric_x().norm(&projected);
    let c = problem.constraint(&z.x);
    let feas = problem.metric_y().dual_norm(&c);
    Ok((stat, feas))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::pendulum_problem;
    use proptest::prelude::*;

    fn box3() -> BoxBounds {
        BoxBounds::new(
            DVector::from_vec(vec![-1.0, -1.0, -1.0]),
            DVector::from_vec(vec![1.0, 1.0, 1.0]),
        )
        .unwrap()
    }

    #[test]
    fn clamp_examples() {
        let b = box3();
        let v = DVector::from_vec(vec![2.0, 0.5, -3.0]);
        let p = project_box_bounds(&v, &b);
        assert_eq!(p, DVector::from_vec(vec![1.0, 0.5, -1.0]));
        // idempotence
        assert_eq!(project_box_bounds(&p, &b), p);
    }

    #[test]
    fn tangent_cone_at_lower_bound() {
        let b = box3();
        let x = DVector::from_vec(vec![-1.0, 0.0, 1.0]);
        let d = DVector::from_vec(vec![-2.0, 0.3, 0.4]);
        let t = project_tangent_cone_bounds(&d, &x, &b).unwrap();
        assert_eq!(t, DVector::from_vec(vec![0.0, 0.3, 0.0]));
    }

    #[test]
    fn membership_enforced() {
        let b = box3();
        let x = DVector::from_vec(vec![1.5, 0.0, 0.0]);
        let d = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        assert!(matches!(
            project_tangent_cone_bounds(&d, &x, &b),
            Err(SolverError::OutsideBox { index: 0, .. })
        ));
    }

    #[test]
    fn degenerate_bound_maps_to_zero() {
        let b = BoxBounds::new(DVector::from_vec(vec![2.0]), DVector::from_vec(vec![2.0])).unwrap();
        let x = DVector::from_vec(vec![2.0]);
        let d = DVector::from_vec(vec![-5.0]);
        let t = project_tangent_cone_bounds(&d, &x, &b).unwrap();
        assert_eq!(t[0], 0.0);
        let d = DVector::from_vec(vec![5.0]);
        let t = project_tangent_cone_bounds(&d, &x, &b).unwrap();
        assert_eq!(t[0], 0.0);
    }

    #[test]
    fn pendulum_critical_points() {
        let p = pendulum_problem();
        for (x2, y) in [(-1.0, 0.5), (1.0, -0.5)] {
            let z = PrimalDual::from_slices(&[0.0, x2], &[y]);
            let (stat, feas) = criticality_residual(&z, &p, 0.0).unwrap();
            assert!(stat <= 1e-14, "stat = {stat}");
            assert!(feas <= 1e-14, "feas = {feas}");
        }
        let z = PrimalDual::from_slices(&[0.01, 1.0], &[-0.5]);
        let (stat, _) = criticality_residual(&z, &p, 0.0).unwrap();
        assert!(stat > 1e-4);
    }

    /// Enumeration oracle: projects onto the tangent cone by trying every
    /// subset of active coordinates as the zero set and checking optimality.
    fn tangent_projection_oracle(d: &DVector<f64>, x: &DVector<f64>, b: &BoxBounds) -> DVector<f64> {
        let active = ActiveSet::from_point(x, b);
        let constrained: Vec<usize> = (0..d.len())
            .filter(|&i| active.status(i) != BoundStatus::Inactive)
            .collect();
        let mut best: Option<(f64, DVector<f64>)> = None;
        for mask in 0..(1usize << constrained.len()) {
            let mut t = d.clone();
            for (bit, &i) in constrained.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    t[i] = 0.0;
                }
            }
            // feasibility of t in the cone
            let feasible = constrained.iter().all(|&i| match active.status(i) {
                BoundStatus::AtLower => t[i] >= 0.0,
                BoundStatus::AtUpper => t[i] <= 0.0,
                BoundStatus::Inactive => true,
            });
            if !feasible {
                continue;
            }
            let dist = (d - &t).norm_squared();
            if best.as_ref().map_or(true, |(bd, _)| dist < *bd) {
                best = Some((dist, t));
            }
        }
        best.unwrap().1
    }

    proptest! {
        #[test]
        fn moreau_decomposition_properties(
            seed in 0u64..500,
        ) {
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 5;
            let lower = DVector::from_fn(n, |_, _| if rng.random_bool(0.3) { f64::NEG_INFINITY } else { rng.random_range(-1.0..0.0) });
            let upper = DVector::from_fn(n, |i, _| if rng.random_bool(0.3) { f64::INFINITY } else { lower[i].max(-0.5) + rng.random_range(0.0..1.5) });
            let b = BoxBounds::new(lower, upper).unwrap();
            let raw = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let x = project_box_bounds(&raw, &b);
            let d = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));

            let t = project_tangent_cone_bounds(&d, &x, &b).unwrap();
            let polar = &d - &t;
            // orthogonality and reconstruction
            prop_assert!(t.dot(&polar).abs() <= 1e-10);
            prop_assert!((&d - (&t + &polar)).amax() <= 1e-14);
            // Moreau identity <d, P_T(d)> = |P_T(d)|^2
            prop_assert!((d.dot(&t) - t.norm_squared()).abs() <= 1e-10);
            // agreement with the enumeration oracle
            let oracle = tangent_projection_oracle(&d, &x, &b);
            prop_assert!((&t - &oracle).amax() <= 1e-10);

            // non-expansiveness of the box projection
            let v = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
            let w = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
            let pv = project_box_bounds(&v, &b);
            let pw = project_box_bounds(&w, &b);
            prop_assert!((pv - pw).norm() <= (v - w).norm() + 1e-14);
        }
    }
}
