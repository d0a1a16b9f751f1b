//! Moment-matrix relaxation of the eavesdropper's guessing probability, from
//! monomial algebra to a certified bound.

pub mod embed;
pub mod monomial;
pub mod problem;

pub use embed::{embed_hermitian, ConicMap};
pub use monomial::{Generator, HierarchyLevel, Monomial};
pub use problem::{
    build_problem, CellTerm, MomentClass, MomentConstraint, MomentError, MomentProblem,
};

use crate::sdp::{self, Sense, SolveStatus, SolverOptions};

/// A certified upper bound on Eve's joint guess-and-succeed probability, in
/// the problem's original (complex-side) units, with everything the
/// finite-size machinery needs to re-evaluate it at shifted statistics.
#[derive(Debug, Clone)]
pub struct PgBound {
    /// Certified bound on p(e = k, succ) at the observed statistics.
    pub joint_bound: f64,
    /// K: multiplier mass on everything but the statistics constraints,
    /// including the PSD repair cushion.
    pub k_const: f64,
    /// Per-statistic multipliers nu_{x,y} and the constraint sense (an
    /// inequality pins the tail-bound direction; equalities go by sign).
    pub nu: Vec<((usize, usize), f64, Sense)>,
    /// Primal optimum estimate from the solver, same units.
    pub primal_estimate: f64,
    pub status: SolveStatus,
    pub verified: bool,
    pub slack_summary: String,
    pub level_label: String,
    pub iterations: usize,
}

impl PgBound {
    /// K + sum nu q for statistics q supplied per cell.
    pub fn bound_at<F: FnMut(usize, usize) -> f64>(&self, mut q: F) -> f64 {
        self.k_const + self.nu.iter().map(|&((x, y), nu, _)| nu * q(x, y)).sum::<f64>()
    }
}

/// Solve the relaxation and return the certified joint-guessing bound.
///
/// The bound comes from the re-verified dual certificate, never from the
/// solver's primal claim; `verified` reports whether the independent
/// feasibility check passed at its margin.
pub fn solve_guessing(
    problem: &MomentProblem,
    opts: &SolverOptions,
) -> Result<PgBound, MomentError> {
    let (conic, map) = problem.to_conic();
    let sol = sdp::solve(&conic, opts)?;
    let cert = match sol.certificate {
        Some(c) => c,
        None => return Err(MomentError::Solver(sol.status)),
    };
    Ok(PgBound {
        joint_bound: cert.bound / map.scale,
        k_const: cert.k_const / map.scale,
        // Embedded targets are doubled, so multipliers against the original
        // statistics are exactly the solver's y.
        nu: cert.nu.clone(),
        primal_estimate: sol.primal_value / map.scale,
        status: sol.status,
        verified: cert.verified,
        slack_summary: cert.spectrum_summary(),
        level_label: problem.level_label.clone(),
        iterations: sol.iterations,
    })
}
