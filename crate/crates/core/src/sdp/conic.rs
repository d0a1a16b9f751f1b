//! Real symmetric conic problems in trace form:
//!
//!   maximize    tr(C X)
//!   subject to  tr(A_i X) {=, <=, >=} b_i,   X PSD.
//!
//! Constraints carry a class tag so that dual multipliers of statistics
//! constraints can be pulled out of a certificate by downstream finite-size
//! analysis; everything else aggregates into the certificate's constant term.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("constraint {index}: {reason}")]
    BadConstraint { index: usize, reason: String },
    #[error("solver failed: {0}")]
    Numerical(String),
    #[error("problem reported {0:?}; no usable certificate")]
    NotSolved(SolveStatus),
}

/// Sparse real symmetric matrix: entries (r, c, v) with r <= c stand for
/// M[r,c] = M[c,r] = v.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymMat {
    pub dim: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SymMat {
    pub fn new(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.dim && c < self.dim);
        if v != 0.0 {
            let (r, c) = if r <= c { (r, c) } else { (c, r) };
            self.entries.push((r, c, v));
        }
    }

    /// Merge duplicate coordinates and drop zeros.
    pub fn compress(&mut self) {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(r, c, v) in &self.entries {
            match out.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => out.push((r, c, v)),
            }
        }
        out.retain(|&(_, _, v)| v != 0.0);
        self.entries = out;
    }

    /// <M, X> = tr(M X) for symmetric dense X.
    pub fn inner(&self, x: &DMatrix<f64>) -> f64 {
        let mut acc = 0.0;
        for &(r, c, v) in &self.entries {
            acc += if r == c { v * x[(r, r)] } else { 2.0 * v * x[(r, c)] };
        }
        acc
    }

    /// Add w * M into dense symmetric accumulator.
    pub fn add_into(&self, out: &mut DMatrix<f64>, w: f64) {
        for &(r, c, v) in &self.entries {
            out[(r, c)] += w * v;
            if r != c {
                out[(c, r)] += w * v;
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        self.add_into(&mut m, 1.0);
        m
    }

    pub fn frob_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(r, c, v)| if r == c { v * v } else { 2.0 * v * v })
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Eq,
    Le,
    Ge,
}

/// What a constraint means to the security analysis: a statistics constraint
/// ties a moment to an observed p(b=0|x,y) and its multiplier becomes a
/// finite-size score; everything else contributes to the constant term K.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintClass {
    Statistics { x: usize, y: usize },
    Fixed,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub mat: SymMat,
    pub rhs: f64,
    pub sense: Sense,
    pub class: ConstraintClass,
}

/// A trace-form SDP over one dense PSD block.
#[derive(Debug, Clone)]
pub struct ConicProblem {
    pub dim: usize,
    pub objective: SymMat,
    pub constraints: Vec<Constraint>,
    /// A priori bound on tr(X) over the feasible set, when the modeling layer
    /// knows one (moment matrices: every diagonal entry is at most 1). Used to
    /// turn a slightly infeasible dual into a rigorous bound.
    pub trace_bound: Option<f64>,
}

impl ConicProblem {
    pub fn new(dim: usize) -> Self {
        Self { dim, objective: SymMat::new(dim), constraints: Vec::new(), trace_bound: None }
    }

    pub fn add_constraint(&mut self, mat: SymMat, sense: Sense, rhs: f64, class: ConstraintClass) {
        debug_assert_eq!(mat.dim, self.dim);
        self.constraints.push(Constraint { mat, rhs, sense, class });
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        for (i, c) in self.constraints.iter().enumerate() {
            if c.mat.dim != self.dim {
                return Err(SdpError::BadConstraint {
                    index: i,
                    reason: format!("dimension {} != {}", c.mat.dim, self.dim),
                });
            }
            if c.mat.entries.is_empty() {
                return Err(SdpError::BadConstraint { index: i, reason: "empty functional".into() });
            }
            if !c.rhs.is_finite() {
                return Err(SdpError::BadConstraint { index: i, reason: "non-finite rhs".into() });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Converged short of the requested tolerance but with small residuals;
    /// reported instead of silent failure.
    NearOptimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}
