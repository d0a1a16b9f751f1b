//! From certified guessing-probability bounds to key rates.
//!
//! Asymptotically R = (Hmin - H2[QBER]) p(succ) with
//! Hmin = -log2 p_g(e=k|succ). For finite runs, the verified dual certificate
//! K + sum nu p is re-priced at one-sided Clopper-Pearson bounds on the joint
//! event probabilities, each in the direction that worsens the bound, with
//! the failure budget union-bounded across cells; p(succ) is lower-bounded
//! and the QBER upper-bounded the same way. The conditional bound
//! p_g*/p* then holds with confidence 1 - (a1 + a2).

use thiserror::Error;

use crate::beta::{self, BetaError, TailDirection};
use crate::moment::PgBound;
use crate::sdp::Sense;
use crate::stats::{StatError, StatTable};

#[derive(Debug, Error)]
pub enum SecurityError {
    #[error("certificate failed independent verification; refusing to derive bounds from it")]
    UnverifiedCertificate,
    #[error(transparent)]
    Beta(#[from] BetaError),
    #[error(transparent)]
    Stats(#[from] StatError),
}

/// Binary entropy in bits, with 0 log 0 = 0.
pub fn binary_entropy(p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

/// Key rate with and without the clamp at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRate {
    pub rate: f64,
    pub unclamped: f64,
}

/// R = (-log2 p_g(e=k|succ) - H2[QBER]) p(succ), clamped at zero.
pub fn asymptotic_keyrate(pg_conditional: f64, qber: f64, p_succ: f64) -> KeyRate {
    let pg = pg_conditional.clamp(0.5, 1.0);
    let q = qber.clamp(0.0, 0.5);
    let unclamped = (-pg.log2() - binary_entropy(q)) * p_succ;
    KeyRate { rate: unclamped.max(0.0), unclamped }
}

/// One-sided Clopper-Pearson bound on a binomial success probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBound {
    pub successes: u64,
    pub trials: u64,
    pub alpha: f64,
    pub direction: TailDirection,
    pub bound: f64,
}

pub fn clopper_pearson(
    successes: u64,
    trials: u64,
    alpha: f64,
    direction: TailDirection,
) -> Result<TailBound, SecurityError> {
    let bound = beta::clopper_pearson(successes, trials, alpha, direction)?;
    Ok(TailBound { successes, trials, alpha, direction, bound })
}

/// Joint-event probability bound for cell (x, y): exact in probability mode,
/// Clopper-Pearson over all N rounds in count mode.
fn joint_bound(
    counts: &StatTable,
    x: usize,
    y: usize,
    alpha: f64,
    direction: TailDirection,
) -> Result<f64, SecurityError> {
    if counts.rounds() == 0 {
        let p = counts.cond_p0(x, y)?;
        return Ok(p * counts.weights().p_x[x] * counts.weights().p_y[y]);
    }
    Ok(beta::clopper_pearson(counts.count0(x, y), counts.rounds(), alpha, direction)?)
}

/// Upper bound on Eve's joint guess-and-succeed probability holding with
/// confidence 1 - a1: every statistics multiplier is re-priced at a one-sided
/// bound on the corresponding joint event, in the direction that increases
/// the total, with a1 split uniformly across the constraints.
pub fn finite_size_pg_bound(
    pg: &PgBound,
    counts: &StatTable,
    a1: f64,
) -> Result<f64, SecurityError> {
    if !pg.verified {
        return Err(SecurityError::UnverifiedCertificate);
    }
    if pg.nu.is_empty() {
        return Ok(pg.k_const);
    }
    let alpha_cell = a1 / pg.nu.len() as f64;
    let w = counts.weights();
    let mut acc = pg.k_const;
    for &((x, y), nu, sense) in &pg.nu {
        if nu == 0.0 {
            continue;
        }
        // Direction that worsens (raises) the certified total. One-sided
        // constraints pin it: a Le row stays valid for any larger target, a
        // Ge row for any smaller one.
        let dir = match sense {
            Sense::Le => TailDirection::Upper,
            Sense::Ge => TailDirection::Lower,
            Sense::Eq => {
                if nu >= 0.0 {
                    TailDirection::Upper
                } else {
                    TailDirection::Lower
                }
            }
        };
        let q_joint = joint_bound(counts, x, y, alpha_cell, dir)?;
        let score = nu / (w.p_x[x] * w.p_y[y]);
        acc += score * q_joint;
    }
    Ok(acc)
}

/// Lower bound on p(succ) with confidence 1 - a2: per-cell lower bounds on
/// the joint conclusive-event probabilities, a2 union-bounded across cells.
pub fn finite_size_psucc_bound(counts: &StatTable, a2: f64) -> Result<f64, SecurityError> {
    let n = counts.n();
    let w = counts.weights().clone();
    let cells: Vec<(usize, usize)> = (0..n)
        .flat_map(|x| (0..n).map(move |y| (x, y)))
        .filter(|&(x, y)| w.sift_weight(x, y) > 0.0)
        .collect();
    if cells.is_empty() {
        return Ok(0.0);
    }
    let alpha_cell = a2 / cells.len() as f64;
    let mut acc = 0.0;
    for (x, y) in cells {
        let q = joint_bound(counts, x, y, alpha_cell, TailDirection::Lower)?;
        acc += w.sift_weight(x, y) / (w.p_x[x] * w.p_y[y]) * q;
    }
    Ok(acc.max(0.0))
}

/// Upper bound on the sifted-error mass (the numerator of the QBER) with
/// confidence 1 - alpha, union-bounded across the diagonal cells.
fn finite_size_error_mass_bound(counts: &StatTable, alpha: f64) -> Result<f64, SecurityError> {
    let n = counts.n();
    let w = counts.weights().clone();
    let cells: Vec<usize> = (0..n).filter(|&x| w.sift_weight(x, x) > 0.0).collect();
    if cells.is_empty() {
        return Ok(0.0);
    }
    let alpha_cell = alpha / cells.len() as f64;
    let mut acc = 0.0;
    for x in cells {
        let q = joint_bound(counts, x, x, alpha_cell, TailDirection::Upper)?;
        acc += w.sift_weight(x, x) / (w.p_x[x] * w.p_y[x]) * q;
    }
    Ok(acc)
}

/// Protocol, channel and analysis parameters echoed into every report.
#[derive(Debug, Clone)]
pub struct RunParams {
    pub n: usize,
    pub theta: f64,
    pub mu: f64,
    pub phase_step: f64,
    pub eta: f64,
    pub p_dc: f64,
    pub sigma: f64,
    pub delta_theta: f64,
    pub delta_xy: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub a1: f64,
    pub a2: f64,
    pub rounds: u64,
    pub seed: Option<u64>,
}

/// Everything the analysis produced for one statistics block.
#[derive(Debug, Clone)]
pub struct KeyRateReport {
    pub params: RunParams,
    /// The verified certificate this report is built on.
    pub certificate: PgBound,
    /// Point estimates at the observed frequencies.
    pub p_succ: f64,
    pub qber: f64,
    pub pg_conditional: f64,
    pub h_min: f64,
    pub rate_asymptotic: KeyRate,
    /// Finite-size side (equals the asymptotic side on probability tables).
    pub pg_joint_finite: f64,
    pub p_succ_lower: f64,
    pub qber_upper: f64,
    pub pg_conditional_finite: f64,
    pub h_min_finite: f64,
    pub rate_finite: KeyRate,
    /// Total failure probability a1 + a2 of the finite-size claims.
    pub alpha_total: f64,
    /// Set when the finite-size bounds admit no key (p* = 0 or p_g*/p* >= 1).
    pub degenerate: bool,
}

/// Assemble the finite-size report: p_g(e=k|succ) <= p_g*/p* with confidence
/// at least 1 - (a1 + a2), the QBER charged to the a2 budget, and the rate
/// per the asymptotic formula evaluated at the bounds.
pub fn finite_size_report(
    pg: &PgBound,
    counts: &StatTable,
    a1: f64,
    a2: f64,
    params: RunParams,
) -> Result<KeyRateReport, SecurityError> {
    if !pg.verified {
        return Err(SecurityError::UnverifiedCertificate);
    }
    let n = counts.n();
    let w = counts.weights().clone();

    // Point estimates at observed frequencies.
    let mut p_succ = 0.0;
    let mut err_mass = 0.0;
    for x in 0..n {
        for y in 0..n {
            let sw = w.sift_weight(x, y);
            if sw > 0.0 {
                let f = counts.cond_p0(x, y)?;
                p_succ += sw * f;
                if x == y {
                    err_mass += sw * f;
                }
            }
        }
    }
    let qber = if p_succ > 0.0 { err_mass / p_succ } else { 0.0 };
    let pg_conditional = if p_succ > 0.0 { (pg.joint_bound / p_succ).clamp(0.5, 1.0) } else { 1.0 };
    let h_min = -pg_conditional.log2();
    let rate_asymptotic = asymptotic_keyrate(pg_conditional, qber, p_succ);

    // Finite-size side. The a2 budget covers the success lower bound and the
    // error-mass upper bound via one union over their cells.
    let n_succ_cells = (0..n * n).filter(|i| w.sift_weight(i / n, i % n) > 0.0).count();
    let n_err_cells = (0..n).filter(|&x| w.sift_weight(x, x) > 0.0).count();
    let total_cells = (n_succ_cells + n_err_cells).max(1);
    let a2_succ = a2 * n_succ_cells as f64 / total_cells as f64;
    let a2_err = a2 * n_err_cells as f64 / total_cells as f64;

    let pg_joint_finite = finite_size_pg_bound(pg, counts, a1)?;
    let p_succ_lower = finite_size_psucc_bound(counts, a2_succ)?;
    let err_upper = finite_size_error_mass_bound(counts, a2_err)?;

    let degenerate_psucc = p_succ_lower <= 0.0;
    let pg_conditional_finite = if degenerate_psucc {
        1.0
    } else {
        (pg_joint_finite / p_succ_lower).clamp(0.5, 1.0)
    };
    let qber_upper =
        if degenerate_psucc { 0.5 } else { (err_upper / p_succ_lower).clamp(0.0, 0.5) };
    let h_min_finite = -pg_conditional_finite.log2();
    let rate_finite = if degenerate_psucc {
        KeyRate { rate: 0.0, unclamped: 0.0 }
    } else {
        asymptotic_keyrate(pg_conditional_finite, qber_upper, p_succ_lower)
    };
    let degenerate = degenerate_psucc || pg_conditional_finite >= 1.0;

    Ok(KeyRateReport {
        params,
        certificate: pg.clone(),
        p_succ,
        qber,
        pg_conditional,
        h_min,
        rate_asymptotic,
        pg_joint_finite,
        p_succ_lower,
        qber_upper,
        pg_conditional_finite,
        h_min_finite,
        rate_finite,
        alpha_total: a1 + a2,
        degenerate,
    })
}

impl KeyRateReport {
    /// Structured text report with the embedded certificate.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        s.push_str("key-rate report\n");
        s.push_str(&format!(
            "protocol: n={} theta={} mu={} phase_step={}\n",
            p.n, p.theta, p.mu, p.phase_step
        ));
        s.push_str(&format!(
            "channel:  eta={} p_dc={} sigma={} delta_theta={} delta_xy={}\n",
            p.eta, p.p_dc, p.sigma, p.delta_theta, p.delta_xy
        ));
        s.push_str(&format!(
            "analysis: level={} epsilon={} tol={:.1e} a1={:.3e} a2={:.3e} rounds={} seed={}\n",
            self.certificate.level_label,
            p.epsilon,
            p.tol,
            p.a1,
            p.a2,
            p.rounds,
            p.seed.map_or("-".to_string(), |s| s.to_string()),
        ));
        s.push_str(&format!("observed: p_succ={:.9e} qber={:.9e}\n", self.p_succ, self.qber));
        s.push_str(&format!(
            "asymptotic: pg_joint={:.9e} pg_cond={:.9} h_min={:.9} R={:.9e} (unclamped {:.9e})\n",
            self.certificate.joint_bound,
            self.pg_conditional,
            self.h_min,
            self.rate_asymptotic.rate,
            self.rate_asymptotic.unclamped
        ));
        s.push_str(&format!(
            "finite:   pg_joint<={:.9e} p_succ>={:.9e} qber<={:.9e} pg_cond<={:.9} R={:.9e} confidence>={}\n",
            self.pg_joint_finite,
            self.p_succ_lower,
            self.qber_upper,
            self.pg_conditional_finite,
            self.rate_finite.rate,
            1.0 - self.alpha_total
        ));
        if self.degenerate {
            s.push_str("finite-size analysis degenerate: no key certified for this block\n");
        }
        s.push_str(&format!(
            "certificate: status={:?} verified={} iterations={}\n",
            self.certificate.status, self.certificate.verified, self.certificate.iterations
        ));
        s.push_str(&format!("certificate: K={:.12e}\n", self.certificate.k_const));
        for &((x, y), nu, sense) in &self.certificate.nu {
            let sense = match sense {
                Sense::Eq => "=",
                Sense::Le => "<=",
                Sense::Ge => ">=",
            };
            s.push_str(&format!("certificate: nu[{x},{y}] ({sense}) = {nu:.12e}\n"));
        }
        s.push_str(&format!("certificate: {}\n", self.certificate.slack_summary));
        s
    }

    pub fn csv_header() -> &'static str {
        "n,theta,mu,eta,p_dc,sigma,level,rounds,p_succ,qber,pg_cond,r_asymptotic,pg_cond_finite,qber_upper,p_succ_lower,r_finite,alpha_total,verified,status"
    }

    /// Machine-readable summary row matching [`KeyRateReport::csv_header`].
    pub fn to_csv_row(&self) -> String {
        let p = &self.params;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:?}",
            p.n,
            p.theta,
            p.mu,
            p.eta,
            p.p_dc,
            p.sigma,
            self.certificate.level_label,
            p.rounds,
            self.p_succ,
            self.qber,
            self.pg_conditional,
            self.rate_asymptotic.rate,
            self.pg_conditional_finite,
            self.qber_upper,
            self.p_succ_lower,
            self.rate_finite.rate,
            self.alpha_total,
            self.certificate.verified,
            self.certificate.status
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment::{build_problem, solve_guessing, HierarchyLevel};
    use crate::protocol::{ideal_statistics, sift, GramConstraint, ProtocolSpec};
    use crate::sdp::{SolveStatus, SolverOptions};
    use approx::assert_relative_eq;

    fn dummy_params() -> RunParams {
        RunParams {
            n: 2,
            theta: 0.6,
            mu: 1.0,
            phase_step: std::f64::consts::PI,
            eta: 1.0,
            p_dc: 0.0,
            sigma: 0.0,
            delta_theta: 0.0,
            delta_xy: 0.0,
            epsilon: 0.0,
            tol: 1e-8,
            a1: 1e-9,
            a2: 1e-9,
            rounds: 0,
            seed: None,
        }
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert_relative_eq!(binary_entropy(0.5), 1.0, epsilon = 1e-15);
        assert_relative_eq!(binary_entropy(0.11), 0.4999, epsilon = 1e-4);
        assert_relative_eq!(binary_entropy(0.3), binary_entropy(0.7), epsilon = 1e-15);
    }

    #[test]
    fn asymptotic_rate_values() {
        assert_eq!(asymptotic_keyrate(1.0, 0.0, 0.3).rate, 0.0);
        let r = asymptotic_keyrate(0.5, 0.0, 0.1365);
        assert_relative_eq!(r.rate, 0.1365, epsilon = 1e-12);
        let r = asymptotic_keyrate(0.7, 0.5, 0.2);
        assert_eq!(r.rate, 0.0, "QBER 1/2 costs the whole bit");
        assert!(r.unclamped < 0.0);
    }

    #[test]
    fn tail_bound_invariants() {
        let up = clopper_pearson(30, 100, 0.01, TailDirection::Upper).unwrap();
        let lo = clopper_pearson(30, 100, 0.01, TailDirection::Lower).unwrap();
        assert!(lo.bound <= 0.3 && 0.3 <= up.bound);
        assert!((0.0..=1.0).contains(&up.bound));
    }

    fn synthetic_pg(k: f64, nu: Vec<((usize, usize), f64, Sense)>) -> PgBound {
        PgBound {
            joint_bound: k + nu.iter().map(|&(_, v, _)| v * 0.1).sum::<f64>(),
            k_const: k,
            nu,
            primal_estimate: 0.0,
            status: SolveStatus::Optimal,
            verified: true,
            slack_summary: String::new(),
            level_label: "S1+AB".into(),
            iterations: 0,
        }
    }

    #[test]
    fn all_zero_multipliers_return_k() {
        let spec = ProtocolSpec::new(2, 0.6, 1.0).unwrap();
        let counts = StatTable::from_counts(
            spec.input_weights(),
            vec![10, 200, 220, 9],
            vec![1000, 800, 800, 1000],
        )
        .unwrap();
        let pg = synthetic_pg(0.42, vec![((0, 1), 0.0, Sense::Eq)]);
        let b = finite_size_pg_bound(&pg, &counts, 1e-6).unwrap();
        assert_eq!(b, 0.42);
    }

    #[test]
    fn unverified_certificates_are_refused() {
        let spec = ProtocolSpec::new(2, 0.6, 1.0).unwrap();
        let counts =
            StatTable::from_counts(spec.input_weights(), vec![1; 4], vec![10; 4]).unwrap();
        let mut pg = synthetic_pg(0.1, vec![]);
        pg.verified = false;
        assert!(matches!(
            finite_size_pg_bound(&pg, &counts, 1e-6),
            Err(SecurityError::UnverifiedCertificate)
        ));
    }

    #[test]
    fn probability_tables_reproduce_asymptotics() {
        // On a probability-mode table the finite-size fields equal the
        // asymptotic ones exactly.
        let spec = ProtocolSpec::new(2, 0.6, 1.0).unwrap();
        let gram = GramConstraint::ideal(&spec);
        let stats = ideal_statistics(&spec, 0.8).unwrap();
        let problem = build_problem(&spec, &gram, &stats, &HierarchyLevel::S1AB).unwrap();
        let pg = solve_guessing(&problem, &SolverOptions::default()).unwrap();
        let report = finite_size_report(&pg, &stats, 1e-9, 1e-9, dummy_params()).unwrap();
        assert_relative_eq!(report.pg_joint_finite, pg.joint_bound, epsilon = 1e-12);
        let sifted = sift(&spec, &stats).unwrap();
        assert_relative_eq!(report.p_succ_lower, sifted.p_succ, epsilon = 1e-12);
        assert_relative_eq!(report.p_succ, sifted.p_succ, epsilon = 1e-12);
        assert_relative_eq!(report.qber_upper, report.qber, epsilon = 1e-12);
        assert_relative_eq!(report.rate_finite.rate, report.rate_asymptotic.rate, epsilon = 1e-10);
    }

    #[test]
    fn finite_bounds_are_conservative_and_tighten_with_n() {
        // CP-penalized fields bracket the point estimates, and the finite
        // rate approaches the asymptotic rate as N grows at fixed
        // frequencies.
        let spec = ProtocolSpec::new(2, 0.6, 0.4).unwrap();
        let gram = GramConstraint::ideal(&spec);
        let p0 = vec![0.01, 0.20, 0.19, 0.012];
        let stats = StatTable::from_probs(spec.input_weights(), p0.clone()).unwrap();
        let problem = build_problem(&spec, &gram, &stats, &HierarchyLevel::S1AB).unwrap();
        let pg = solve_guessing(&problem, &SolverOptions::default()).unwrap();
        assert!(pg.verified);

        let mut last_rate = -1.0;
        for &n_rounds in &[20_000u64, 200_000, 2_000_000] {
            let per_cell = n_rounds / 4;
            let zero: Vec<u64> = p0.iter().map(|p| (p * per_cell as f64).round() as u64).collect();
            let one: Vec<u64> = zero.iter().map(|z| per_cell - z).collect();
            let counts = StatTable::from_counts(spec.input_weights(), zero, one).unwrap();
            let rep = finite_size_report(&pg, &counts, 1e-9, 1e-9, dummy_params()).unwrap();
            assert!(
                rep.pg_joint_finite >= pg.joint_bound - 1e-12,
                "finite pg bound must sit above the asymptotic one"
            );
            assert!(rep.p_succ_lower <= rep.p_succ + 1e-12);
            assert!(rep.qber_upper >= rep.qber - 1e-12);
            assert!(rep.rate_finite.rate <= rep.rate_asymptotic.rate + 1e-12);
            assert!(
                rep.rate_finite.rate >= last_rate,
                "finite rate should improve with N: {} -> {}",
                last_rate,
                rep.rate_finite.rate
            );
            last_rate = rep.rate_finite.rate;
        }
    }

    #[test]
    fn psucc_bound_zero_without_conclusive_events() {
        let spec = ProtocolSpec::new(2, 0.6, 1.0).unwrap();
        let counts =
            StatTable::from_counts(spec.input_weights(), vec![0; 4], vec![1000; 4]).unwrap();
        // Lower CP bound at s = 0 is 0 in every cell.
        assert_eq!(finite_size_psucc_bound(&counts, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn report_text_and_csv_mention_certificate() {
        let spec = ProtocolSpec::new(2, 0.6, 1.0).unwrap();
        let gram = GramConstraint::ideal(&spec);
        let stats = ideal_statistics(&spec, 0.8).unwrap();
        let problem = build_problem(&spec, &gram, &stats, &HierarchyLevel::S1AB).unwrap();
        let pg = solve_guessing(&problem, &SolverOptions::default()).unwrap();
        let report = finite_size_report(&pg, &stats, 1e-9, 1e-9, dummy_params()).unwrap();
        let text = report.to_text();
        assert!(text.contains("certificate: K="));
        assert!(text.contains("nu[0,1]"));
        assert!(text.contains("slack eigenvalues"));
        let row = report.to_csv_row();
        assert_eq!(row.split(',').count(), KeyRateReport::csv_header().split(',').count());
    }
}
