//! Benchmark problems: four small analytic programs and a quasilinear
//! elliptic optimal-control problem on the unit square.

mod analytic;
pub mod elliptic;
mod fem;

pub use analytic::{
    nonconvex_qp_problem, pendulum_problem, random_qp_problem, scalar_problem, NonconvexQp,
    Pendulum, RandomQp, Scalar,
};
pub use elliptic::{elliptic_problem, EllipticConfig, EllipticProblem};
pub use fem::{riesz_solve, FemAssembly};
