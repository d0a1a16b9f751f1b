//! Self-contained semidefinite programming: trace-form conic problems, a
//! dense primal-dual interior-point solver, and dual certificates whose
//! feasibility is re-verified by an independent eigenvalue computation.
//!
//! The verification path never trusts solver output: [`verify_certificate`]
//! takes a bare multiplier vector against the problem data, so an external
//! conic solver can be substituted for [`solve`] without weakening any
//! soundness claim — its multipliers go through the same re-check.

pub mod certificate;
pub mod conic;
mod jacobi;
pub mod solver;

pub use certificate::{verify_certificate, DualCertificate};
pub use conic::{ConicProblem, Constraint, ConstraintClass, SdpError, Sense, SolveStatus, SymMat};
pub use jacobi::symmetric_eigenvalues;
pub use solver::{solve, Solution, SolverOptions};
