//! Sequential homotopy solver for programs of the form
//! `min phi(x) over x in C subject to c(x) = 0` with box sets `C`.
//!
//! The solver follows projected backward-Euler steps of the projected
//! gradient/antigradient flow of an augmented Lagrangian. Each step is a
//! proximally regularized subproblem solved by a semismooth Newton method;
//! an outer loop re-anchors the proximal reference and steers the stepsize
//! `1/lambda` with a PI controller.
//!
//! The crate ships the solver itself, explicit flow integrators used for
//! validation, and a set of benchmark problems including a quasilinear
//! elliptic optimal-control problem discretized by P1 finite elements.

pub mod aug_lagrangian;
pub mod benchmarks;
pub mod boxes;
pub mod error;
pub mod experiments;
pub mod flow;
pub mod homotopy;
pub mod linalg;
pub mod problem;
pub mod space;
pub mod subproblem;

pub use boxes::{criticality_residual, moreau_decompose, project_box, project_tangent_cone};
pub use error::SolverError;
pub use homotopy::{fixed_lambda_solve, solve, DriverParams, SolveStatus};
pub use problem::{check_derivatives, Problem};
pub use space::{z_norm, PrimalDual, SpaceMetric};
pub use subproblem::ProxParams;
