//! Control-constrained quasilinear elliptic optimal control on the unit
//! square: track a target state under the weak form
//! `∫ ∇φ·(a + b u²)∇u - ∫ φ q = 0` with pointwise bounds on the control.
//!
//! Unknowns are `x = (u, q)` with `u` the interior state coefficients and
//! `q` the control on all nodes. The state space carries the stiffness
//! metric (`‖u‖ = ‖∇u‖`), the control space the lumped-mass metric, and the
//! dual space the stiffness metric through Riesz representatives. The
//! control block of the assembled systems is therefore diagonal and the
//! pointwise projector is exact in coordinates.

use std::sync::Arc;

use nalgebra::DVector;

use crate::boxes::BoxBounds;
use crate::error::{Result, SolverError};
use crate::linalg::{SparseMatrix, Triplets};
use crate::problem::Problem;
use crate::space::SpaceMetric;

use super::fem::{ElementContext, FemAssembly, NOT_INTERIOR};

/// Configuration of the elliptic benchmark. `a` and `b` follow the
/// one-parameter family `a = 10^-p`, `b = 10^p`; smaller `a` worsens the
/// conditioning while larger `b` strengthens the nonlinearity.
#[derive(Debug, Clone)]
pub struct EllipticConfig {
    /// Elements per side of the unit square.
    pub n: usize,
    pub a: f64,
    pub b: f64,
    /// Control regularization weight; always recorded explicitly.
    pub gamma: f64,
}

impl EllipticConfig {
    pub fn from_exponent(n: usize, p: i32, gamma: f64) -> Self {
        Self { n, a: 10f64.powi(-p), b: 10f64.powi(p), gamma }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(SolverError::InvalidParameter("need n >= 2".into()));
        }
        if !(self.a > 0.0) || !(self.b >= 0.0) || !(self.gamma > 0.0) {
            return Err(SolverError::InvalidParameter(
                "need a > 0, b >= 0, gamma > 0".into(),
            ));
        }
        Ok(())
    }

    /// Discretization choices that the problem class leaves open, recorded
    /// with every experiment.
    pub fn discretization_notes() -> &'static str {
        "P1 on alternating-diagonal right triangles; 3-point edge-midpoint quadrature \
         for the quasilinear form; nodal interpolation of target and bounds; \
         lumped-mass inner product and control cost on the control space"
    }
}

/// Target state `12 (1-ξ₁) ξ₁ (1-ξ₂) ξ₂`.
pub fn target_state(xi: [f64; 2]) -> f64 {
    12.0 * (1.0 - xi[0]) * xi[0] * (1.0 - xi[1]) * xi[1]
}

/// Control bounds: constant lower bound `-50` and the hat-shaped upper bound
/// `min(50, 800 max((ξ₁-½)², (ξ₂-½)²))`.
pub fn control_lower(_xi: [f64; 2]) -> f64 {
    -50.0
}

pub fn control_upper(xi: [f64; 2]) -> f64 {
    let d1 = (xi[0] - 0.5) * (xi[0] - 0.5);
    let d2 = (xi[1] - 0.5) * (xi[1] - 0.5);
    50f64.min(800.0 * d1.max(d2))
}

pub struct EllipticProblem {
    pub fem: Arc<FemAssembly>,
    pub config: EllipticConfig,
    /// Interior-node coefficients of the nodally interpolated target.
    pub target_interior: DVector<f64>,
    metric_x: SpaceMetric,
    metric_y: SpaceMetric,
    bounds: BoxBounds,
}

pub fn elliptic_problem(config: EllipticConfig) -> Result<EllipticProblem> {
    config.validate()?;
    let fem = Arc::new(FemAssembly::new(config.n)?);
    let n_u = fem.n_interior();
    let n_q = fem.n_nodes();

    let target_interior =
        DVector::from_fn(n_u, |k, _| target_state(fem.coords[fem.interior[k]]));

    // X = U x Q: stiffness on the state block, lumped mass on the control
    let mut gram_x = Triplets::new(n_u + n_q, n_u + n_q);
    gram_x.push_block(0, 0, &fem.stiffness, 1.0);
    for i in 0..n_q {
        gram_x.push(n_u + i, n_u + i, fem.lumped_mass[i]);
    }
    let metric_x = SpaceMetric::sparse(gram_x.compress())?;
    let metric_y = SpaceMetric::sparse(fem.stiffness.clone())?;

    let mut lower = DVector::from_element(n_u + n_q, f64::NEG_INFINITY);
    let mut upper = DVector::from_element(n_u + n_q, f64::INFINITY);
    for i in 0..n_q {
        lower[n_u + i] = control_lower(fem.coords[i]);
        upper[n_u + i] = control_upper(fem.coords[i]);
    }
    let bounds = BoxBounds::new(lower, upper)?;

    Ok(EllipticProblem { fem, config, target_interior, metric_x, metric_y, bounds })
}

impl EllipticProblem {
    pub fn n_u(&self) -> usize {
        self.fem.n_interior()
    }

    pub fn n_q(&self) -> usize {
        self.fem.n_nodes()
    }

    fn split<'a>(&self, x: &'a DVector<f64>) -> (DVector<f64>, &'a [f64]) {
        let u = x.rows(0, self.n_u()).into_owned();
        let q = &x.as_slice()[self.n_u()..];
        (u, q)
    }

    /// Per-triangle weight `s = a |T| + b ∫_T u²` of the quasilinear form,
    /// with the u² integral evaluated by the exact midpoint rule.
    fn element_weight(&self, ctx: &ElementContext, ul: [f64; 3]) -> (f64, [f64; 3], [f64; 3]) {
        let mut int_u2 = 0.0;
        let mut u_mid = [0.0; 3];
        for m in 0..3 {
            let um = ctx.phi_at_mid[m][0] * ul[0]
                + ctx.phi_at_mid[m][1] * ul[1]
                + ctx.phi_at_mid[m][2] * ul[2];
            u_mid[m] = um;
            int_u2 += um * um;
        }
        int_u2 *= ctx.area / 3.0;
        let s = self.config.a * ctx.area + self.config.b * int_u2;
        // ds/du_j = 2 b (|T|/3) Σ_m u(m) φ_j(m)
        let mut ds = [0.0; 3];
        for j in 0..3 {
            let mut acc = 0.0;
            for m in 0..3 {
                acc += u_mid[m] * ctx.phi_at_mid[m][j];
            }
            ds[j] = 2.0 * self.config.b * (ctx.area / 3.0) * acc;
        }
        (s, ds, u_mid)
    }

    fn local_values(&self, full: &DVector<f64>, tri: &[usize; 3]) -> [f64; 3] {
        [full[tri[0]], full[tri[1]], full[tri[2]]]
    }
}

impl Problem for EllipticProblem {
    fn dim_x(&self) -> usize {
        self.n_u() + self.n_q()
    }
    fn dim_y(&self) -> usize {
        self.n_u()
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
        let (u, q) = self.split(x);
        let diff = &u - &self.target_interior;
        let m_rows = &self.fem.mass_interior_rows;
        // tracking term uses the consistent mass restricted to the interior
        let diff_full = self.fem.extend_interior(&diff);
        let m_diff = m_rows.apply(&diff_full).expect("dims");
        let tracking = 0.5 * diff.dot(&m_diff);
        let mut control = 0.0;
        for i in 0..self.n_q() {
            control += q[i] * q[i] * self.fem.lumped_mass[i];
        }
        tracking + 0.5 * self.config.gamma * control
    }

    fn grad_phi_dual(&self, x: &DVector<f64>) -> DVector<f64> {
        let (u, q) = self.split(x);
        let diff_full = self.fem.extend_interior(&(&u - &self.target_interior));
        let m_diff = self.fem.mass_interior_rows.apply(&diff_full).expect("dims");
        let mut out = DVector::zeros(self.dim_x());
        out.rows_mut(0, self.n_u()).copy_from(&m_diff);
        for i in 0..self.n_q() {
            out[self.n_u() + i] = self.config.gamma * self.fem.lumped_mass[i] * q[i];
        }
        out
    }

    fn constraint(&self, x: &DVector<f64>) -> DVector<f64> {
        let (u, q) = self.split(x);
        let u_full = self.fem.extend_interior(&u);
        let mut out_full = DVector::zeros(self.n_q());
        for tri in &self.fem.triangles {
            let ctx = ElementContext::new(&self.fem.coords, tri);
            let ul = self.local_values(&u_full, tri);
            let (s, _, _) = self.element_weight(&ctx, ul);
            // ∫ (a + b u²) ∇φ_i · ∇u = (s/|T|) (K_loc u)_i
            let mut grad_u = [0.0; 2];
            for a in 0..3 {
                grad_u[0] += ctx.grads[a][0] * ul[a];
                grad_u[1] += ctx.grads[a][1] * ul[a];
            }
            for a in 0..3 {
                out_full[tri[a]] +=
                    s * (ctx.grads[a][0] * grad_u[0] + ctx.grads[a][1] * grad_u[1]);
            }
        }
        let mut out = DVector::from_fn(self.n_u(), |k, _| out_full[self.fem.interior[k]]);
        let q_vec = DVector::from_column_slice(q);
        out -= self.fem.mass_interior_rows.apply(&q_vec).expect("dims");
        out
    }

    fn jac_c(&self, x: &DVector<f64>) -> SparseMatrix {
        let (u, _) = self.split(x);
        let u_full = self.fem.extend_interior(&u);
        let n_u = self.n_u();
        let mut t = Triplets::with_capacity(
            n_u,
            self.dim_x(),
            9 * self.fem.triangles.len() + self.fem.mass_interior_rows.nnz(),
        );
        for tri in &self.fem.triangles {
            let ctx = ElementContext::new(&self.fem.coords, tri);
            let ul = self.local_values(&u_full, tri);
            let (s, ds, _) = self.element_weight(&ctx, ul);
            let mut grad_u = [0.0; 2];
            for a in 0..3 {
                grad_u[0] += ctx.grads[a][0] * ul[a];
                grad_u[1] += ctx.grads[a][1] * ul[a];
            }
            // k_gu[a] = |T| ∇φ_a · ∇u, k_ab = |T| ∇φ_a · ∇φ_b
            for a in 0..3 {
                let row = self.fem.interior_map[tri[a]];
                if row == NOT_INTERIOR {
                    continue;
                }
                let k_gu_a =
                    ctx.area * (ctx.grads[a][0] * grad_u[0] + ctx.grads[a][1] * grad_u[1]);
                for b in 0..3 {
                    let col = self.fem.interior_map[tri[b]];
                    if col == NOT_INTERIOR {
                        continue;
                    }
                    let k_ab = ctx.area
                        * (ctx.grads[a][0] * ctx.grads[b][0]
                            + ctx.grads[a][1] * ctx.grads[b][1]);
                    t.push(row, col, (s / ctx.area) * k_ab + (ds[b] / ctx.area) * k_gu_a);
                }
            }
        }
        // control coupling -M on the interior rows
        t.push_block(0, n_u, &self.fem.mass_interior_rows, -1.0);
        t.compress()
    }

    fn hess_lagrangian(&self, x: &DVector<f64>, y_tilde: &DVector<f64>) -> SparseMatrix {
        let (u, _) = self.split(x);
        let u_full = self.fem.extend_interior(&u);
        let w_full = self.fem.extend_interior(&y_tilde.clone());
        let n_u = self.n_u();
        let mut t = Triplets::with_capacity(
            self.dim_x(),
            self.dim_x(),
            9 * self.fem.triangles.len() + self.fem.mass_interior_rows.nnz() + self.n_q(),
        );
        // tracking block: consistent interior mass
        for col in 0..self.n_q() {
            let jc = self.fem.interior_map[col];
            if jc == NOT_INTERIOR {
                continue;
            }
            for (row, val) in self.fem.mass_interior_rows.col_iter(col) {
                t.push(row, jc, val);
            }
        }
        // second derivative of the quasilinear form contracted with the
        // Riesz-represented adjoint w
        for tri in &self.fem.triangles {
            let ctx = ElementContext::new(&self.fem.coords, tri);
            let ul = self.local_values(&u_full, tri);
            let wl = self.local_values(&w_full, tri);
            let (_, ds, _) = self.element_weight(&ctx, ul);
            let mut grad_u = [0.0; 2];
            let mut grad_w = [0.0; 2];
            for a in 0..3 {
                grad_u[0] += ctx.grads[a][0] * ul[a];
                grad_u[1] += ctx.grads[a][1] * ul[a];
                grad_w[0] += ctx.grads[a][0] * wl[a];
                grad_w[1] += ctx.grads[a][1] * wl[a];
            }
            let gu_dot_gw = grad_u[0] * grad_w[0] + grad_u[1] * grad_w[1];
            let mut k_w = [0.0; 3];
            for a in 0..3 {
                k_w[a] = ctx.area * (ctx.grads[a][0] * grad_w[0] + ctx.grads[a][1] * grad_w[1]);
            }
            // 2b ∫ φ_a φ_b (∇u·∇w) via the midpoint rule, plus the two
            // rank-one couplings ds k_w^T + k_w ds^T
            for a in 0..3 {
                let row = self.fem.interior_map[tri[a]];
                if row == NOT_INTERIOR {
                    continue;
                }
                for b in 0..3 {
                    let col = self.fem.interior_map[tri[b]];
                    if col == NOT_INTERIOR {
                        continue;
                    }
                    let mut m_mid = 0.0;
                    for m in 0..3 {
                        m_mid += ctx.phi_at_mid[m][a] * ctx.phi_at_mid[m][b];
                    }
                    m_mid *= ctx.area / 3.0;
                    let val = 2.0 * self.config.b * m_mid * gu_dot_gw
                        + (ds[a] * k_w[b] + ds[b] * k_w[a]) / ctx.area;
                    t.push(row, col, val);
                }
            }
        }
        // control block: lumped-mass regularization
        for i in 0..self.n_q() {
            t.push(n_u + i, n_u + i, self.config.gamma * self.fem.lumped_mass[i]);
        }
        t.compress()
    }

    fn name(&self) -> &str {
        "elliptic"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::check_derivatives;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn small_problem() -> EllipticProblem {
        elliptic_problem(EllipticConfig::from_exponent(4, 0, 1e-2)).unwrap()
    }

    #[test]
    fn derivative_check_random_point() {
        let p = small_problem();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = DVector::from_fn(p.dim_x(), |_, _| rng.random_range(-0.5..0.5));
        let report = check_derivatives(&p, &x, 1e-6).unwrap();
        assert!(report.max_dev() <= 1e-5, "{report:?}");
    }

    #[test]
    fn hessian_is_symmetric() {
        let p = small_problem();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = DVector::from_fn(p.dim_x(), |_, _| rng.random_range(-0.5..0.5));
        let w = DVector::from_fn(p.dim_y(), |_, _| rng.random_range(-1.0..1.0));
        let h = p.hess_lagrangian(&x, &w).to_dense();
        assert!((&h - h.transpose()).amax() <= 1e-13);
    }

    #[test]
    fn linear_case_zero_control_zero_state() {
        // b = 0, q = 0: the linear Poisson problem with zero source has the
        // zero solution only
        let p = elliptic_problem(EllipticConfig { n: 6, a: 1.0, b: 0.0, gamma: 1e-2 }).unwrap();
        let x = DVector::zeros(p.dim_x());
        assert!(p.constraint(&x).amax() == 0.0);
        let mut x = DVector::zeros(p.dim_x());
        x[0] = 0.3;
        assert!(p.constraint(&x).amax() > 0.0);
    }

    #[test]
    fn bound_functions_match_formulas() {
        let p = small_problem();
        let n_u = p.n_u();
        for (i, &coord) in p.fem.coords.iter().enumerate() {
            assert_eq!(p.bounds().lower()[n_u + i], -50.0);
            let expect = 50f64
                .min(800.0 * ((coord[0] - 0.5).powi(2)).max((coord[1] - 0.5).powi(2)));
            assert_eq!(p.bounds().upper()[n_u + i], expect);
        }
        // centre node has a zero upper bound for even n
        let centre = (p.fem.n / 2) * (p.fem.n + 1) + p.fem.n / 2;
        assert_eq!(p.bounds().upper()[n_u + centre], 0.0);
    }
}
