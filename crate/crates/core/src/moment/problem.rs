//! Construction of the Hermitian moment-matrix relaxation.
//!
//! The moment matrix is indexed by (state block i, basis word k): entry
//! ((i,k),(j,l)) holds <psi_i| S_k^dag S_l |psi_j>. Three constraint families
//! pin it down:
//!
//! * statistics: identity-row entries of diagonal blocks equal p(0|x,y);
//! * Gram: identity-corner entries of each block equal (or box around) the
//!   assumed overlaps gamma_ij;
//! * structural: any two cells whose block and canonical word coincide hold
//!   the same number — the linear shadow of the projector algebra — plus
//!   vanishing imaginary parts wherever self-adjointness forces them.
//!
//! The objective selects Eve's joint guess-and-succeed weight with the
//! outcome-1 operators expanded via completeness before canonicalization.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use super::monomial::{Generator, HierarchyLevel, Monomial};
use crate::protocol::{GramConstraint, OverlapMode, ProtocolSpec};
use crate::sdp::Sense;
use crate::stats::{StatError, StatTable};

#[derive(Debug, Error)]
pub enum MomentError {
    #[error("hierarchy level is missing monomials required by the objective: {0:?}")]
    MissingMonomials(Vec<String>),
    #[error("dimension mismatch: protocol has n={spec_n}, {what} has n={got}")]
    SizeMismatch { spec_n: usize, what: &'static str, got: usize },
    #[error("problem has complex data and no direct real form; use the embedding")]
    NotReal,
    #[error("statistics leave no conclusive events; the guessing problem is degenerate")]
    DegenerateStatistics,
    #[error(transparent)]
    Stats(#[from] StatError),
    #[error(transparent)]
    Sdp(#[from] crate::sdp::SdpError),
    #[error("solver reported {0:?}")]
    Solver(crate::sdp::SolveStatus),
}

/// One addend of a real-valued functional on the Hermitian moment matrix:
/// w_re * Re(G[row, col]) + w_im * Im(G[row, col]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellTerm {
    pub row: usize,
    pub col: usize,
    pub w_re: f64,
    pub w_im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentClass {
    /// Ties a moment to an observed p(0|x,y).
    Statistics { x: usize, y: usize },
    /// Overlap assumption on block (i, j); `imag` distinguishes the two real
    /// components.
    Gram { i: usize, j: usize, imag: bool },
    /// Equality of cells carrying the same canonical monomial, and forced
    /// vanishing imaginary parts.
    Structural,
    /// Diagonal moments <u^dag u> are at most 1 (operator norms of projector
    /// words never exceed 1). Holds for every quantum realization, bounds the
    /// feasible set, and underwrites the certificate's trace cushion.
    NormCap,
}

#[derive(Debug, Clone)]
pub struct MomentConstraint {
    pub terms: Vec<CellTerm>,
    pub rhs: f64,
    pub sense: Sense,
    pub class: MomentClass,
}

/// The assembled relaxation, still in complex-cell form; convert with
/// [`MomentProblem::to_conic`] before solving.
#[derive(Debug, Clone)]
pub struct MomentProblem {
    pub n: usize,
    pub basis: Vec<Monomial>,
    pub level_label: String,
    /// Complex-side dimension of the (possibly face-reduced) moment matrix.
    pub dim: usize,
    /// Row r of the reduced matrix corresponds to index `rows[r] = i*q + k`
    /// of the full (state block i, basis word k) layout.
    pub rows: Vec<usize>,
    /// Statistics cells removed by exact facial reduction (probability-mode
    /// zeros); they carry no dual multiplier and the resulting certificate is
    /// valid only at exactly those statistics.
    pub reduced_cells: Vec<(usize, usize)>,
    pub constraints: Vec<MomentConstraint>,
    /// Joint guess-and-succeed selector (maximization target).
    pub objective: Vec<CellTerm>,
    /// Success selector; its value is fixed by the statistics constraints.
    pub success: Vec<CellTerm>,
    /// True when the Gram data is exactly real, enabling the direct real form.
    pub all_real: bool,
}

/// Statistics targets that are exactly zero sit on the boundary of the PSD
/// cone (the moment vector B|psi> must vanish). Relaxing them to a one-sided
/// bound of this width keeps the relaxation sound — it can only enlarge the
/// feasible set, i.e. raise the certified bound by a negligible amount — and
/// restores a strictly feasible interior for the interior-point solver.
pub const ZERO_STAT_PAD: f64 = 1e-11;

/// Build the relaxation of the joint guessing probability from the overlap
/// assumption, the observed statistics and a hierarchy level.
// Index loops below run over state/setting labels that double as map keys;
// iterator rewrites obscure that.
#[allow(clippy::needless_range_loop)]
pub fn build_problem(
    spec: &ProtocolSpec,
    gram: &GramConstraint,
    stats: &StatTable,
    level: &HierarchyLevel,
) -> Result<MomentProblem, MomentError> {
    let n = spec.n();
    if gram.n() != n {
        return Err(MomentError::SizeMismatch { spec_n: n, what: "Gram constraint", got: gram.n() });
    }
    if stats.n() != n {
        return Err(MomentError::SizeMismatch { spec_n: n, what: "statistics table", got: stats.n() });
    }

    let basis = level.basis(n, spec.num_pairs());
    let q = basis.len();

    // Merge exactly duplicate preparations: |gamma_ij| = 1 means
    // psi_j = gamma_ij psi_i, so block j of the moment matrix is a unit-phase
    // copy of block i and every diagonal-block functional (statistics,
    // selectors) is phase-immune. Merging is exact, removes the rank
    // deficiency such Grams force, and only applies in exact mode when the
    // remaining overlaps are consistent with the identification.
    let mut reps: Vec<usize> = Vec::new();
    let mut block_of: Vec<usize> = vec![usize::MAX; n];
    for j in 0..n {
        let mut merged = false;
        if gram.mode() == OverlapMode::Exact {
            for (a, &i) in reps.iter().enumerate() {
                let g_ij = gram.gamma()[(i, j)];
                if (g_ij.norm() - 1.0).abs() <= 1e-12 {
                    let consistent = (0..n).all(|k| {
                        (gram.gamma()[(k, j)] - g_ij * gram.gamma()[(k, i)]).norm() <= 1e-9
                    });
                    if consistent {
                        block_of[j] = a;
                        merged = true;
                        break;
                    }
                }
            }
        }
        if !merged {
            block_of[j] = reps.len();
            reps.push(j);
        }
    }
    let nb = reps.len();
    let dim = nb * q;

    // Positions of the generator words the selectors need.
    let pos: BTreeMap<&Monomial, usize> = basis.iter().zip(0..).collect();
    let mut missing = Vec::new();
    let b_idx: Vec<usize> = (0..n)
        .map(|y| {
            let w = Monomial::generator(Generator::B(y as u8));
            pos.get(&w).copied().unwrap_or_else(|| {
                missing.push(w.to_string());
                usize::MAX
            })
        })
        .collect();
    let e_idx: Vec<usize> = (0..spec.num_pairs())
        .map(|z| {
            let w = Monomial::generator(Generator::E(z as u8));
            pos.get(&w).copied().unwrap_or_else(|| {
                missing.push(w.to_string());
                usize::MAX
            })
        })
        .collect();
    if !missing.is_empty() {
        return Err(MomentError::MissingMonomials(missing));
    }

    let mut constraints = Vec::new();

    // Structural family: group upper-triangle cells by the normalized
    // (block, canonical word) key; Hermiticity identifies (i,j,w) with
    // (j,i,w^dag) up to conjugation.
    type Key = (usize, usize, Monomial);
    let mut groups: BTreeMap<Key, Vec<(usize, usize, bool)>> = BTreeMap::new();
    for row in 0..dim {
        let (i, k) = (row / q, row % q);
        let row_word = basis[k].adjoint();
        for col in row..dim {
            let (j, l) = (col / q, col % q);
            let word = row_word.product(&basis[l]);
            let direct: Key = (i, j, word);
            let mirrored: Key = (direct.1, direct.0, direct.2.adjoint());
            let (key, conj) = if mirrored < direct { (mirrored, true) } else { (direct, false) };
            groups.entry(key).or_default().push((row, col, conj));
        }
    }
    for ((i, j, word), cells) in &groups {
        let (r0, c0, conj0) = cells[0];
        let rep_diag = r0 == c0;
        // Self-adjoint key on a diagonal block: the value is real.
        if *i == *j && word.is_self_adjoint() && !rep_diag {
            constraints.push(MomentConstraint {
                terms: vec![CellTerm { row: r0, col: c0, w_re: 0.0, w_im: 1.0 }],
                rhs: 0.0,
                sense: Sense::Eq,
                class: MomentClass::Structural,
            });
        }
        for &(r, c, conj) in &cells[1..] {
            // Real parts agree regardless of conjugation.
            constraints.push(MomentConstraint {
                terms: vec![
                    CellTerm { row: r, col: c, w_re: 1.0, w_im: 0.0 },
                    CellTerm { row: r0, col: c0, w_re: -1.0, w_im: 0.0 },
                ],
                rhs: 0.0,
                sense: Sense::Eq,
                class: MomentClass::Structural,
            });
            // Imaginary parts agree up to the relative conjugation. A
            // diagonal member is real automatically and its key is then
            // self-adjoint, so the representative's vanishing imaginary part
            // is already on the list; emitting it again would duplicate a
            // row.
            if r != c {
                let sign = if conj == conj0 { -1.0 } else { 1.0 };
                let mut terms = vec![CellTerm { row: r, col: c, w_re: 0.0, w_im: 1.0 }];
                if !rep_diag {
                    terms.push(CellTerm { row: r0, col: c0, w_re: 0.0, w_im: sign });
                }
                constraints.push(MomentConstraint {
                    terms,
                    rhs: 0.0,
                    sense: Sense::Eq,
                    class: MomentClass::Structural,
                });
            }
        }
    }

    // Gram family on the identity corners of each (representative) block.
    let mut all_real = true;
    for a in 0..nb {
        for b in a..nb {
            let (i, j) = (reps[a], reps[b]);
            let (row, col) = (a * q, b * q);
            let g = gram.gamma()[(i, j)];
            if g.im != 0.0 {
                all_real = false;
            }
            if i == j {
                constraints.push(MomentConstraint {
                    terms: vec![CellTerm { row, col, w_re: 1.0, w_im: 0.0 }],
                    rhs: 1.0,
                    sense: Sense::Eq,
                    class: MomentClass::Gram { i, j, imag: false },
                });
                continue;
            }
            match gram.mode() {
                OverlapMode::Exact => {
                    constraints.push(MomentConstraint {
                        terms: vec![CellTerm { row, col, w_re: 1.0, w_im: 0.0 }],
                        rhs: g.re,
                        sense: Sense::Eq,
                        class: MomentClass::Gram { i, j, imag: false },
                    });
                    constraints.push(MomentConstraint {
                        terms: vec![CellTerm { row, col, w_re: 0.0, w_im: 1.0 }],
                        rhs: g.im,
                        sense: Sense::Eq,
                        class: MomentClass::Gram { i, j, imag: true },
                    });
                }
                OverlapMode::Box => {
                    let eps = gram.epsilon();
                    for (w_re, w_im, target, imag) in [
                        (1.0, 0.0, g.re, false),
                        (0.0, 1.0, g.im, true),
                    ] {
                        for (sense, rhs) in [(Sense::Le, target + eps), (Sense::Ge, target - eps)] {
                            constraints.push(MomentConstraint {
                                terms: vec![CellTerm { row, col, w_re, w_im }],
                                rhs,
                                sense,
                                class: MomentClass::Gram { i, j, imag },
                            });
                        }
                    }
                }
            }
        }
    }

    // Norm caps on every non-identity diagonal moment (the identity corners
    // are pinned to 1 by the Gram diagonal).
    for a in 0..nb {
        for k in 1..q {
            let d = a * q + k;
            constraints.push(MomentConstraint {
                terms: vec![CellTerm { row: d, col: d, w_re: 1.0, w_im: 0.0 }],
                rhs: 1.0,
                sense: Sense::Le,
                class: MomentClass::NormCap,
            });
        }
    }

    // Statistics family on the identity rows of the diagonal blocks. States
    // merged into one block fall on the same cell: equal targets collapse to
    // one constraint; conflicting targets are kept so the solver reports the
    // (genuine) infeasibility.
    let mut seen_stat_cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for x in 0..n {
        for y in 0..n {
            let p = stats.cond_p0(x, y)?;
            let a = block_of[x];
            let (row, col) = (a * q, a * q + b_idx[y]);
            match seen_stat_cells.get(&(row, col)) {
                Some(&prev) if (prev - p).abs() <= 1e-12 => continue,
                _ => {
                    seen_stat_cells.insert((row, col), p);
                }
            }
            let term = CellTerm { row, col, w_re: 1.0, w_im: 0.0 };
            let (sense, rhs) =
                if p == 0.0 { (Sense::Le, ZERO_STAT_PAD) } else { (Sense::Eq, p) };
            constraints.push(MomentConstraint {
                terms: vec![term],
                rhs,
                sense,
                class: MomentClass::Statistics { x, y },
            });
        }
    }

    // Selectors. Joint guess weight: for k = 0 the cell <B_y E_r>, for k = 1
    // the expansion <B_y (1 - E_r)> = <B_y> - <B_y E_r>.
    let mut obj: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut succ: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (ri, &(r0, r1)) in spec.pairs().iter().enumerate() {
        for (k, &rk) in [r0, r1].iter().enumerate() {
            for y in [r0, r1] {
                let w = spec.p_r()[ri] * spec.p_k()[k] * spec.p_y()[y];
                let a = block_of[rk] * q;
                let b_cell = (a, a + b_idx[y]);
                let be_cell = (a + b_idx[y], a + e_idx[ri]);
                *succ.entry(b_cell).or_insert(0.0) += w;
                if k == 0 {
                    *obj.entry(be_cell).or_insert(0.0) += w;
                } else {
                    *obj.entry(b_cell).or_insert(0.0) += w;
                    *obj.entry(be_cell).or_insert(0.0) -= w;
                }
            }
        }
    }
    let pack = |m: BTreeMap<(usize, usize), f64>| {
        m.into_iter()
            .filter(|&(_, w)| w != 0.0)
            .map(|((row, col), w)| CellTerm { row, col, w_re: w, w_im: 0.0 })
            .collect::<Vec<_>>()
    };
    let mut problem = MomentProblem {
        n,
        basis,
        level_label: level.label(),
        dim,
        rows: (0..dim).map(|r| reps[r / q] * q + r % q).collect(),
        reduced_cells: Vec::new(),
        constraints,
        objective: pack(obj),
        success: pack(succ),
        all_real,
    };

    // Exact facial reduction for probability-mode zeros: p(0|x,y) = 0 forces
    // B_y |psi_x> = 0, so every column whose word ends (in operator order)
    // with that projector vanishes identically. Removing those rows/columns
    // is an exact transformation of the relaxation and takes the ideal-channel
    // instances off the boundary of the PSD cone. Count-mode tables keep the
    // padded one-sided constraints instead: their certificates must remain
    // valid in a statistical neighborhood of the observation.
    if stats.rounds() == 0 {
        let q = problem.basis.len();
        let mut zero_cells = Vec::new();
        for x in 0..n {
            for y in 0..n {
                if stats.cond_p0(x, y)? == 0.0 {
                    zero_cells.push((x, y));
                }
            }
        }
        if !zero_cells.is_empty() {
            let mut keep = vec![true; dim];
            for &(x, y) in &zero_cells {
                for (l, word) in problem.basis.iter().enumerate() {
                    if word.b_part_last() == Some(y as u8) {
                        keep[block_of[x] * q + l] = false;
                    }
                }
            }
            problem.apply_face(&keep)?;
            problem.reduced_cells = zero_cells;
        }
    }
    if problem.objective.is_empty() {
        return Err(MomentError::DegenerateStatistics);
    }
    Ok(problem)
}

fn eval_terms(terms: &[CellTerm], g: &DMatrix<Complex64>) -> f64 {
    terms
        .iter()
        .map(|t| {
            let v = g[(t.row, t.col)];
            t.w_re * v.re + t.w_im * v.im
        })
        .sum()
}

/// Worst-case violations of a candidate Hermitian matrix against each
/// constraint family; the oracle check for explicitly constructed models.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalReport {
    pub max_structural: f64,
    pub max_gram: f64,
    pub max_statistics: f64,
    pub objective: f64,
    pub success: f64,
}

impl MomentProblem {
    /// Restrict the problem to the face given by the keep mask over full
    /// (block, word) indices. Dropped cells are identically zero there, so
    /// functionals lose those terms; constraints left with no terms must be
    /// vacuous.
    fn apply_face(&mut self, keep: &[bool]) -> Result<(), MomentError> {
        let mut new_index = vec![usize::MAX; keep.len()];
        let mut rows = Vec::new();
        for (old, &k) in keep.iter().enumerate() {
            if k {
                new_index[old] = rows.len();
                rows.push(self.rows[old]);
            }
        }
        let remap = |terms: &[CellTerm]| -> Vec<CellTerm> {
            terms
                .iter()
                .filter(|t| keep[t.row] && keep[t.col])
                .map(|t| CellTerm { row: new_index[t.row], col: new_index[t.col], ..*t })
                .collect()
        };
        let mut kept_constraints = Vec::with_capacity(self.constraints.len());
        for con in &self.constraints {
            let terms = remap(&con.terms);
            if terms.is_empty() {
                let vacuous = match con.sense {
                    Sense::Eq => con.rhs.abs() < 1e-12,
                    Sense::Le => con.rhs >= -1e-12,
                    Sense::Ge => con.rhs <= 1e-12,
                };
                if !vacuous {
                    return Err(MomentError::DegenerateStatistics);
                }
                continue;
            }
            kept_constraints.push(MomentConstraint { terms, ..con.clone() });
        }
        self.constraints = kept_constraints;
        self.objective = remap(&self.objective);
        self.success = remap(&self.success);
        self.dim = rows.len();
        self.rows = rows;
        Ok(())
    }

    /// Evaluate all constraints and selectors on an explicit moment matrix in
    /// the *full* (n x q) layout; face-reduced problems index into it through
    /// their row map.
    pub fn eval_on(&self, g: &DMatrix<Complex64>) -> EvalReport {
        let full = self.n * self.basis.len();
        assert_eq!(g.nrows(), full);
        let lift = |terms: &[CellTerm]| -> Vec<CellTerm> {
            terms
                .iter()
                .map(|t| CellTerm { row: self.rows[t.row], col: self.rows[t.col], ..*t })
                .collect()
        };
        let mut rep = EvalReport {
            objective: eval_terms(&lift(&self.objective), g),
            success: eval_terms(&lift(&self.success), g),
            ..Default::default()
        };
        for con in &self.constraints {
            let v = eval_terms(&lift(&con.terms), g);
            let viol = match con.sense {
                Sense::Eq => (v - con.rhs).abs(),
                Sense::Le => (v - con.rhs).max(0.0),
                Sense::Ge => (con.rhs - v).max(0.0),
            };
            match con.class {
                MomentClass::Structural | MomentClass::NormCap => {
                    rep.max_structural = rep.max_structural.max(viol)
                }
                MomentClass::Gram { .. } => rep.max_gram = rep.max_gram.max(viol),
                MomentClass::Statistics { .. } => {
                    rep.max_statistics = rep.max_statistics.max(viol)
                }
            }
        }
        rep
    }

    /// Documented text form: basis list, sparse constraint triplets and the
    /// selector triplets, for debugging and cross-solver validation.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "moment-problem n={} q={} dim={} level={}", self.n, self.basis.len(), self.dim, self.level_label);
        let _ = writeln!(s, "basis:");
        for (k, w) in self.basis.iter().enumerate() {
            let _ = writeln!(s, "  {k}: {w}");
        }
        let fmt_terms = |terms: &[CellTerm]| -> String {
            terms
                .iter()
                .map(|t| format!("({},{},{},{})", t.row, t.col, t.w_re, t.w_im))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(s, "constraints:");
        for con in &self.constraints {
            let sense = match con.sense {
                Sense::Eq => "=",
                Sense::Le => "<=",
                Sense::Ge => ">=",
            };
            let class = match con.class {
                MomentClass::Statistics { x, y } => format!("stat[{x},{y}]"),
                MomentClass::Gram { i, j, imag } => {
                    format!("gram[{i},{j},{}]", if imag { "im" } else { "re" })
                }
                MomentClass::Structural => "struct".to_string(),
                MomentClass::NormCap => "cap".to_string(),
            };
            let _ = writeln!(s, "  {class}: {} {sense} {}", fmt_terms(&con.terms), con.rhs);
        }
        let _ = writeln!(s, "objective: {}", fmt_terms(&self.objective));
        let _ = writeln!(s, "success: {}", fmt_terms(&self.success));
        s
    }

    pub fn num_statistics(&self) -> usize {
        self.constraints
            .iter()
            .filter(|c| matches!(c.class, MomentClass::Statistics { .. }))
            .count()
    }
}
