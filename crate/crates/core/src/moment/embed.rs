//! Real-symmetric conic forms of the Hermitian moment problem.
//!
//! Two routes exist. Problems with real data (the two-state protocol) map
//! directly onto a real symmetric matrix of the same size. General problems
//! use the standard embedding: a Hermitian X + iY is PSD exactly when the
//! real symmetric [[X, -Y], [Y, X]] is, functionals map through the same
//! homomorphism, and tr(R(A) R(B)) = 2 tr(A B) doubles every target and the
//! objective — the optimum is preserved exactly after dividing by two.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::problem::{CellTerm, MomentClass, MomentError, MomentProblem};
use crate::sdp::{ConicProblem, ConstraintClass, Sense, SymMat};

/// Which real form a conic problem was generated through, and the factor by
/// which primal/dual objective values are inflated relative to the
/// complex-side problem (1 for direct, 2 for embedded). Dual multipliers
/// need no rescaling in either form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConicMap {
    pub embedded: bool,
    pub scale: f64,
}

fn class_of(c: MomentClass) -> ConstraintClass {
    match c {
        MomentClass::Statistics { x, y } => ConstraintClass::Statistics { x, y },
        _ => ConstraintClass::Fixed,
    }
}

fn direct_mat(dim: usize, terms: &[CellTerm]) -> Option<SymMat> {
    let mut m = SymMat::new(dim);
    for t in terms {
        if t.w_re != 0.0 {
            if t.row == t.col {
                m.push(t.row, t.col, t.w_re);
            } else {
                m.push(t.row, t.col, 0.5 * t.w_re);
            }
        }
        // Imaginary extractors vanish identically on a real matrix.
    }
    m.compress();
    if m.entries.is_empty() {
        None
    } else {
        Some(m)
    }
}

fn embedded_mat(dim: usize, terms: &[CellTerm]) -> SymMat {
    let mut m = SymMat::new(2 * dim);
    for t in terms {
        let (r, c) = (t.row, t.col);
        if t.w_re != 0.0 {
            if r == c {
                m.push(r, r, t.w_re);
                m.push(r + dim, r + dim, t.w_re);
            } else {
                m.push(r, c, 0.5 * t.w_re);
                m.push(r + dim, c + dim, 0.5 * t.w_re);
            }
        }
        if t.w_im != 0.0 {
            debug_assert!(r != c, "diagonal cells are real");
            m.push(r, c + dim, -0.5 * t.w_im);
            m.push(c, r + dim, 0.5 * t.w_im);
        }
    }
    m.compress();
    m
}

impl MomentProblem {
    /// Direct real form; errors unless the problem's data is exactly real.
    pub fn to_conic_direct(&self) -> Result<(ConicProblem, ConicMap), MomentError> {
        if !self.all_real {
            return Err(MomentError::NotReal);
        }
        let mut conic = ConicProblem::new(self.dim);
        conic.trace_bound = Some(self.dim as f64);
        conic.objective =
            direct_mat(self.dim, &self.objective).expect("objective has real weight");
        for con in &self.constraints {
            match direct_mat(self.dim, &con.terms) {
                Some(mat) => conic.add_constraint(mat, con.sense, con.rhs, class_of(con.class)),
                None => {
                    // A purely imaginary functional is identically zero on a
                    // real matrix; the constraint must then be vacuous.
                    let ok = match con.sense {
                        Sense::Eq => con.rhs.abs() < 1e-12,
                        Sense::Le => con.rhs >= -1e-12,
                        Sense::Ge => con.rhs <= 1e-12,
                    };
                    if !ok {
                        return Err(MomentError::NotReal);
                    }
                }
            }
        }
        Ok((conic, ConicMap { embedded: false, scale: 1.0 }))
    }

    /// Hermitian-to-real embedding; always applicable.
    pub fn to_conic_embedded(&self) -> (ConicProblem, ConicMap) {
        let mut conic = ConicProblem::new(2 * self.dim);
        conic.trace_bound = Some(2.0 * self.dim as f64);
        conic.objective = embedded_mat(self.dim, &self.objective);
        for con in &self.constraints {
            let mat = embedded_mat(self.dim, &con.terms);
            if mat.entries.is_empty() {
                continue;
            }
            conic.add_constraint(mat, con.sense, 2.0 * con.rhs, class_of(con.class));
        }
        (conic, ConicMap { embedded: true, scale: 2.0 })
    }

    /// Preferred real form: direct when the data allows it, embedded
    /// otherwise.
    pub fn to_conic(&self) -> (ConicProblem, ConicMap) {
        match self.to_conic_direct() {
            Ok(pair) => pair,
            Err(_) => self.to_conic_embedded(),
        }
    }
}

/// Real embedding of an explicit Hermitian matrix: [[X, -Y], [Y, X]].
pub fn embed_hermitian(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    let d = m.nrows();
    let mut out = DMatrix::zeros(2 * d, 2 * d);
    for r in 0..d {
        for c in 0..d {
            let v = m[(r, c)];
            out[(r, c)] = v.re;
            out[(r + d, c + d)] = v.re;
            out[(r, c + d)] = -v.im;
            out[(r + d, c)] = v.im;
        }
    }
    out
}
