//! Python bindings for the sequential homotopy solver.
//!
//! Exposes the benchmark problems, the homotopy driver, the fixed-stepsize
//! backward-Euler solver, the explicit flow integrator, and the box/cone
//! primitives. Vectors cross the boundary as plain Python lists.

use std::sync::Arc;

use nalgebra::DVector;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use seqhom::benchmarks::{
    elliptic_problem, nonconvex_qp_problem, pendulum_problem, random_qp_problem, scalar_problem,
    EllipticConfig,
};
use seqhom::flow::{integrate_flow as flow_integrate, FlowOptions};
use seqhom::homotopy::{solve as homotopy_solve, DriverParams, SolveStatus};
use seqhom::problem::check_derivatives as core_check_derivatives;
use seqhom::{criticality_residual, project_box, z_norm, PrimalDual};

fn to_py_err(err: seqhom::SolverError) -> PyErr {
    match err {
        seqhom::SolverError::InvalidParameter(_) | seqhom::SolverError::Config(_) => {
            PyValueError::new_err(err.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn vec_of(x: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(x)
}

/// A benchmark problem instance.
#[pyclass(name = "Problem", frozen)]
pub struct PyProblem {
    inner: Arc<dyn seqhom::Problem>,
}

#[pymethods]
impl PyProblem {
    #[getter]
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }

    #[getter]
    fn dim_y(&self) -> usize {
        self.inner.dim_y()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    fn phi(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check_x(&x)?;
        Ok(self.inner.phi(&vec_of(&x)))
    }

    fn constraint(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check_x(&x)?;
        Ok(self.inner.constraint(&vec_of(&x)).iter().copied().collect())
    }

    fn grad_phi(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check_x(&x)?;
        Ok(seqhom::problem::grad_phi(self.inner.as_ref(), &vec_of(&x)).iter().copied().collect())
    }

    /// Componentwise projection onto the box.
    fn project_box(&self, v: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check_x(&v)?;
        Ok(project_box(&vec_of(&v), self.inner.as_ref()).iter().copied().collect())
    }

    /// Pair `(stationarity, feasibility)` of criticality residuals.
    fn criticality(&self, x: Vec<f64>, y: Vec<f64>, rho: f64) -> PyResult<(f64, f64)> {
        self.check_x(&x)?;
        let z = PrimalDual::new(vec_of(&x), vec_of(&y));
        criticality_residual(&z, self.inner.as_ref(), rho).map_err(to_py_err)
    }

    /// Maximum relative deviation of the analytic derivatives from central
    /// finite differences of step `h`.
    #[pyo3(signature = (x, h = 1e-5))]
    fn check_derivatives(&self, x: Vec<f64>, h: f64) -> PyResult<f64> {
        self.check_x(&x)?;
        core_check_derivatives(self.inner.as_ref(), &vec_of(&x), h)
            .map(|r| r.max_dev())
            .map_err(to_py_err)
    }

    fn z_norm(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        let z = PrimalDual::new(vec_of(&x), vec_of(&y));
        z_norm(&z, self.inner.as_ref()).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(name='{}', dim_x={}, dim_y={})",
            self.inner.name(),
            self.inner.dim_x(),
            self.inner.dim_y()
        )
    }
}

impl PyProblem {
    fn check_x(&self, x: &[f64]) -> PyResult<()> {
        if x.len() != self.inner.dim_x() {
            return Err(PyValueError::new_err(format!(
                "expected a vector of length {}, got {}",
                self.inner.dim_x(),
                x.len()
            )));
        }
        Ok(())
    }
}

#[pyfunction]
fn pendulum() -> PyProblem {
    PyProblem { inner: Arc::new(pendulum_problem()) }
}

#[pyfunction]
fn scalar() -> PyProblem {
    PyProblem { inner: Arc::new(scalar_problem()) }
}

#[pyfunction]
fn nonconvex_qp() -> PyProblem {
    PyProblem { inner: Arc::new(nonconvex_qp_problem()) }
}

#[pyfunction]
fn random_qp(n: usize, m: usize, seed: u64) -> PyResult<PyProblem> {
    Ok(PyProblem { inner: Arc::new(random_qp_problem(n, m, seed).map_err(to_py_err)?) })
}

/// Quasilinear elliptic control benchmark with `a = 10^-p`, `b = 10^p`.
#[pyfunction]
#[pyo3(signature = (n, p = 0, gamma = 1e-2))]
fn elliptic(n: usize, p: i32, gamma: f64) -> PyResult<PyProblem> {
    Ok(PyProblem {
        inner: Arc::new(elliptic_problem(EllipticConfig::from_exponent(n, p, gamma)).map_err(to_py_err)?),
    })
}

/// Homotopy driver parameters; construct with keyword overrides of the
/// reference defaults.
#[pyclass(name = "DriverParams")]
#[derive(Clone)]
pub struct PyDriverParams {
    inner: DriverParams,
}

#[pymethods]
impl PyDriverParams {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<Self> {
        let mut params = DriverParams::default();
        if let Some(kwargs) = kwargs {
            for (key, value) in kwargs.iter() {
                let key: String = key.extract()?;
                let value: f64 = value.extract()?;
                match key.as_str() {
                    "theta_cap" => params.theta_cap = value,
                    "lambda_term" => params.lambda_term = value,
                    "lambda_inc" => params.lambda_inc = value,
                    "tol" => params.tol = value,
                    "theta_ref" => params.theta_ref = value,
                    "k_p" => params.k_p = value,
                    "k_i" => params.k_i = value,
                    "lambda_min" => params.lambda_min = value,
                    "rho" => params.rho = value,
                    "lambda_init" => params.lambda_init = value,
                    "max_inner" => params.max_inner = value as usize,
                    "max_outer" => params.max_outer = value as usize,
                    "curvature_guard" => params.curvature_guard = value != 0.0,
                    other => {
                        return Err(PyValueError::new_err(format!("unknown parameter `{other}`")))
                    }
                }
            }
        }
        params.validate().map_err(to_py_err)?;
        Ok(Self { inner: params })
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Result of a homotopy solve.
#[pyclass(name = "SolveResult", frozen)]
pub struct PySolveResult {
    #[pyo3(get)]
    x: Vec<f64>,
    #[pyo3(get)]
    y: Vec<f64>,
    #[pyo3(get)]
    status: String,
    #[pyo3(get)]
    solved: bool,
    #[pyo3(get)]
    mat_evals: u64,
    #[pyo3(get)]
    res_evals: u64,
    #[pyo3(get)]
    discarded: u64,
    #[pyo3(get)]
    flow_time: f64,
    #[pyo3(get)]
    iterations: usize,
}

#[pymethods]
impl PySolveResult {
    fn __repr__(&self) -> String {
        format!(
            "SolveResult(status='{}', mat_evals={}, res_evals={}, discarded={})",
            self.status, self.mat_evals, self.res_evals, self.discarded
        )
    }
}

/// Runs the sequential homotopy method.
#[pyfunction]
#[pyo3(signature = (problem, x0, y0, params = None))]
fn solve(
    problem: &PyProblem,
    x0: Vec<f64>,
    y0: Vec<f64>,
    params: Option<PyDriverParams>,
) -> PyResult<PySolveResult> {
    let params = params.map(|p| p.inner).unwrap_or_default();
    let z0 = PrimalDual::new(vec_of(&x0), vec_of(&y0));
    let result = homotopy_solve(problem.inner.as_ref(), &z0, &params).map_err(to_py_err)?;
    Ok(PySolveResult {
        x: result.z.x.iter().copied().collect(),
        y: result.z.y.iter().copied().collect(),
        status: result.status.to_string(),
        solved: result.status == SolveStatus::Solved,
        mat_evals: result.log.mat_evals,
        res_evals: result.log.res_evals,
        discarded: result.log.discarded,
        flow_time: result.log.flow_time,
        iterations: result.log.records.len(),
    })
}

/// Performs `n_steps` exact backward-Euler steps of stepsize `1/lam` and
/// returns the iterate sequence as `(x, y)` pairs, the initial point first.
#[pyfunction]
fn fixed_lambda_solve(
    problem: &PyProblem,
    x0: Vec<f64>,
    y0: Vec<f64>,
    lam: f64,
    rho: f64,
    n_steps: usize,
) -> PyResult<Vec<(Vec<f64>, Vec<f64>)>> {
    let z0 = PrimalDual::new(vec_of(&x0), vec_of(&y0));
    let seq = seqhom::fixed_lambda_solve(problem.inner.as_ref(), &z0, lam, rho, n_steps)
        .map_err(to_py_err)?;
    Ok(seq
        .iter()
        .map(|z| (z.x.iter().copied().collect(), z.y.iter().copied().collect()))
        .collect())
}

/// Integrates the projected gradient/antigradient flow with forward Euler;
/// returns `(times, states, norm_c)` with states as `(x, y)` pairs.
#[pyfunction]
#[pyo3(signature = (problem, x0, y0, h, t_final, rho, record_every = 1))]
#[allow(clippy::type_complexity)]
fn integrate_flow(
    problem: &PyProblem,
    x0: Vec<f64>,
    y0: Vec<f64>,
    h: f64,
    t_final: f64,
    rho: f64,
    record_every: usize,
) -> PyResult<(Vec<f64>, Vec<(Vec<f64>, Vec<f64>)>, Vec<f64>)> {
    let z0 = PrimalDual::new(vec_of(&x0), vec_of(&y0));
    let opts = FlowOptions { h, t_final, rho, record_every, ..FlowOptions::default() };
    let traj = flow_integrate(&z0, problem.inner.as_ref(), &opts).map_err(to_py_err)?;
    let states = traj
        .states
        .iter()
        .map(|z| {
            (
                z.x.iter().copied().collect::<Vec<f64>>(),
                z.y.iter().copied().collect::<Vec<f64>>(),
            )
        })
        .collect();
    Ok((traj.times.clone(), states, traj.norm_c.clone()))
}

/// Eigenvalue pair of the scalar benchmark's flow linearization, as
/// `((re, im), (re, im))`.
#[pyfunction]
fn linearized_spectrum_scalar(rho: f64) -> ((f64, f64), (f64, f64)) {
    let (m1, m2) = seqhom::flow::linearized_spectrum_scalar(rho);
    ((m1.re, m1.im), (m2.re, m2.im))
}

#[pymodule]
fn seqhom_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyDriverParams>()?;
    m.add_class::<PySolveResult>()?;
    m.add_function(wrap_pyfunction!(pendulum, m)?)?;
    m.add_function(wrap_pyfunction!(scalar, m)?)?;
    m.add_function(wrap_pyfunction!(nonconvex_qp, m)?)?;
    m.add_function(wrap_pyfunction!(random_qp, m)?)?;
    m.add_function(wrap_pyfunction!(elliptic, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_lambda_solve, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_flow, m)?)?;
    m.add_function(wrap_pyfunction!(linearized_spectrum_scalar, m)?)?;
    Ok(())
}
