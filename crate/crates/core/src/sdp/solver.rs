//! Dense primal-dual interior-point solver for trace-form SDPs.
//!
//! Infeasible-start Mehrotra predictor-corrector with the HKM direction, the
//! standard workhorse for small dense semidefinite programs. Inequality rows
//! get internal nonnegative slacks (1x1 blocks of the cone); the caller-facing
//! problem keeps its senses. Everything is deterministic: no randomness, no
//! thread-order dependence.
//!
//! The returned multipliers feed [`super::certificate::verify_certificate`],
//! which re-checks dual feasibility with an eigensolver that shares no code
//! with this module; nothing downstream trusts the solver's own claim of
//! optimality.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::certificate::{verify_certificate, DualCertificate};
use super::conic::{ConicProblem, SdpError, Sense, SolveStatus};

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Relative tolerance on duality gap and primal/dual residuals.
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction-to-boundary step damping.
    pub step_frac: f64,
    /// Feasibility margin for certificate verification.
    pub cert_margin: f64,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200, step_frac: 0.98, cert_margin: 1e-8, verbose: false }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    /// Primal objective estimate tr(C X) at the final iterate.
    pub primal_value: f64,
    /// Dual objective sum_i y_i b_i at the final iterate.
    pub dual_value: f64,
    /// Sign-cleaned multipliers in the problem's original units.
    pub multipliers: Vec<f64>,
    /// Certificate with independent feasibility re-verification.
    pub certificate: Option<DualCertificate>,
    pub iterations: usize,
}

struct Entry {
    r: usize,
    c: usize,
    v: f64,
}

/// (dS, du, dy, dZ, dw) of one Newton solve.
type Direction = (DMatrix<f64>, DVector<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>);

/// One constraint row in the scaled internal form
/// <A_i, S> + sig_i * u_{slot_i} = b_i.
struct Row {
    entries: Vec<Entry>,
    b: f64,
    sig: f64,
    slot: usize, // usize::MAX when no slack
    scale: f64,  // original = scale * scaled
}

fn frob_of(entries: &[Entry]) -> f64 {
    entries
        .iter()
        .map(|e| if e.r == e.c { e.v * e.v } else { 2.0 * e.v * e.v })
        .sum::<f64>()
        .sqrt()
}

/// tr(A P) for sparse symmetric A and dense (not necessarily symmetric) P.
fn inner_asym(entries: &[Entry], p: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for e in entries {
        acc += e.v * p[(e.c, e.r)];
        if e.r != e.c {
            acc += e.v * p[(e.r, e.c)];
        }
    }
    acc
}

fn add_scaled(entries: &[Entry], out: &mut DMatrix<f64>, w: f64) {
    for e in entries {
        out[(e.r, e.c)] += w * e.v;
        if e.r != e.c {
            out[(e.c, e.r)] += w * e.v;
        }
    }
}

/// Largest step alpha in [0, 1] keeping M + alpha dM positive definite,
/// located by bisection on Cholesky success.
fn max_psd_step(m: &DMatrix<f64>, dm: &DMatrix<f64>) -> f64 {
    let is_pd = |alpha: f64| -> bool {
        let trial = m + dm * alpha;
        Cholesky::new(trial).is_some()
    };
    if is_pd(1.0) {
        return 1.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    for _ in 0..16 {
        let mid = 0.5 * (lo + hi);
        if is_pd(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn max_pos_step(u: &DVector<f64>, du: &DVector<f64>) -> f64 {
    let mut alpha = 1.0f64;
    for i in 0..u.len() {
        if du[i] < 0.0 {
            alpha = alpha.min(-u[i] / du[i]);
        }
    }
    alpha
}

/// Solve a trace-form SDP and independently verify the dual certificate.
pub fn solve(problem: &ConicProblem, opts: &SolverOptions) -> Result<Solution, SdpError> {
    problem.validate()?;
    let d = problem.dim;
    let m = problem.constraints.len();

    // Scale rows to unit Frobenius norm and the objective to unit norm.
    let c_scale = problem.objective.frob_norm().max(1e-12);
    let mut c_mat = DMatrix::<f64>::zeros(d, d);
    problem.objective.add_into(&mut c_mat, 1.0 / c_scale);

    let mut n_sl = 0usize;
    let rows: Vec<Row> = problem
        .constraints
        .iter()
        .map(|con| {
            let entries: Vec<Entry> =
                con.mat.entries.iter().map(|&(r, c, v)| Entry { r, c, v }).collect();
            let sig_raw = match con.sense {
                Sense::Eq => 0.0,
                Sense::Le => 1.0,
                Sense::Ge => -1.0,
            };
            let nrm = (frob_of(&entries).powi(2) + sig_raw * sig_raw).sqrt().max(1e-12);
            let slot = if sig_raw != 0.0 {
                n_sl += 1;
                n_sl - 1
            } else {
                usize::MAX
            };
            Row {
                entries: entries
                    .into_iter()
                    .map(|e| Entry { v: e.v / nrm, ..e })
                    .collect(),
                b: con.rhs / nrm,
                sig: sig_raw / nrm,
                slot,
                scale: c_scale / nrm,
            }
        })
        .collect();

    let b_norm = rows.iter().map(|r| r.b * r.b).sum::<f64>().sqrt();

    // Starting point.
    let xi_p = (d as f64).sqrt() * (1.0 + rows.iter().map(|r| r.b.abs()).fold(0.0, f64::max)) * 10.0;
    let xi_d = (1.0 + c_mat.norm()) * (d as f64).sqrt();
    let mut s = DMatrix::<f64>::identity(d, d) * xi_p;
    let mut u = DVector::<f64>::from_element(n_sl.max(1), xi_p);
    let mut z = DMatrix::<f64>::identity(d, d) * xi_d;
    let mut w = DVector::<f64>::from_element(n_sl.max(1), xi_d);
    let mut y = DVector::<f64>::zeros(m);

    let deg = (d + n_sl) as f64;
    let mut status = SolveStatus::NumericalFailure;
    let mut iterations = 0;
    let mut best_rel = f64::INFINITY;
    let mut stall = 0usize;
    // Best nearly-dual-feasible iterate seen; the certificate re-verification
    // makes returning it sound even when later iterates wander.
    let mut best_dual: Option<(f64, Vec<f64>)> = None;
    let mut prev_best_dobj = f64::INFINITY;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;

        // Residuals.
        let mut r_p = DVector::<f64>::zeros(m);
        for (i, row) in rows.iter().enumerate() {
            let mut ax = 0.0;
            for e in &row.entries {
                ax += if e.r == e.c { e.v * s[(e.r, e.r)] } else { 2.0 * e.v * s[(e.r, e.c)] };
            }
            if row.slot != usize::MAX {
                ax += row.sig * u[row.slot];
            }
            r_p[i] = row.b - ax;
        }
        let mut rd = -&z - &c_mat;
        for (i, row) in rows.iter().enumerate() {
            add_scaled(&row.entries, &mut rd, y[i]);
        }
        let mut rd_sl = DVector::<f64>::zeros(n_sl.max(1));
        for (i, row) in rows.iter().enumerate() {
            if row.slot != usize::MAX {
                rd_sl[row.slot] = row.sig * y[i] - w[row.slot];
            }
        }

        let gap_inner = (s.component_mul(&z)).sum() + u.rows(0, n_sl).dot(&w.rows(0, n_sl));
        let mu = gap_inner / deg;

        let pobj = (c_mat.component_mul(&s)).sum();
        let dobj: f64 = rows.iter().zip(y.iter()).map(|(r, &yi)| r.b * yi).sum();
        let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let prim_inf = r_p.norm() / (1.0 + b_norm);
        let dual_inf = (rd.norm() + rd_sl.norm()) / (1.0 + c_mat.norm());

        if opts.verbose {
            eprintln!(
                "iter {iter:3}  mu={mu:9.2e} gap={rel_gap:9.2e} pinf={prim_inf:9.2e} dinf={dual_inf:9.2e} pobj={pobj:12.6e}"
            );
        }

        if dual_inf <= opts.tol * 1e-2 {
            let candidate = dobj;
            if best_dual.as_ref().is_none_or(|(v, _)| candidate < *v) {
                best_dual = Some((candidate, y.iter().cloned().collect()));
            }
        }

        if rel_gap <= opts.tol && prim_inf <= opts.tol && dual_inf <= opts.tol {
            status = SolveStatus::Optimal;
            break;
        }

        // Divergence heuristics: a wildly negative dual objective with a
        // stuck primal residual signals primal infeasibility (dual ray).
        if dobj < -1e9 * (1.0 + b_norm) && prim_inf > 1e3 * opts.tol {
            status = SolveStatus::Infeasible;
            break;
        }
        if pobj > 1e11 * (1.0 + b_norm) {
            status = SolveStatus::Unbounded;
            break;
        }

        // Progress is either residual progress or progress of the best dual
        // objective: degenerate instances keep grinding the bound down after
        // the gap measure freezes, and the bound is what certificates carry.
        let track = rel_gap.max(prim_inf).max(dual_inf);
        let dual_best_now = best_dual.as_ref().map(|(v, _)| *v).unwrap_or(f64::INFINITY);
        let improved_track = track < best_rel * 0.9995;
        let improved_dual = dual_best_now < prev_best_dobj - opts.tol * 0.1 * (1.0 + dual_best_now.abs());
        prev_best_dobj = prev_best_dobj.min(dual_best_now);
        if improved_track || improved_dual {
            best_rel = best_rel.min(track);
            stall = 0;
        } else {
            stall += 1;
            if stall > 30 {
                // Primal infeasibility is excluded here deliberately: the
                // certificate is re-verified independently, and whatever
                // tightness the stalled primal costs already shows up in the
                // gap (through y^T r_p).
                status = if rel_gap.max(dual_inf) <= opts.tol * 1e3 {
                    SolveStatus::NearOptimal
                } else {
                    SolveStatus::NumericalFailure
                };
                break;
            }
        }

        let z_chol = match Cholesky::new(z.clone()) {
            Some(ch) => ch,
            None => {
                status = SolveStatus::NumericalFailure;
                break;
            }
        };
        let z_inv = z_chol.inverse();

        // Schur complement M_ik = tr(A_i Z^-1 A_k S) + slack diagonal.
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for k in i..m {
                let mut acc = 0.0;
                for ei in &rows[i].entries {
                    for ek in &rows[k].entries {
                        // tr(A_i Z^-1 A_k S) expands over the (<=2)x(<=2)
                        // symmetric images of each entry pair.
                        acc += ei.v * ek.v * (z_inv[(ei.c, ek.r)] * s[(ek.c, ei.r)]);
                        if ek.r != ek.c {
                            acc += ei.v * ek.v * (z_inv[(ei.c, ek.c)] * s[(ek.r, ei.r)]);
                        }
                        if ei.r != ei.c {
                            acc += ei.v * ek.v * (z_inv[(ei.r, ek.r)] * s[(ek.c, ei.c)]);
                            if ek.r != ek.c {
                                acc += ei.v * ek.v * (z_inv[(ei.r, ek.c)] * s[(ek.r, ei.c)]);
                            }
                        }
                    }
                }
                schur[(i, k)] = acc;
                schur[(k, i)] = acc;
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.slot != usize::MAX {
                schur[(i, i)] += row.sig * row.sig * u[row.slot] / w[row.slot];
            }
        }
        let schur_chol = {
            let mut jitter = 0.0;
            let base = schur.diagonal().amax().max(1e-30);
            loop {
                let trial = if jitter > 0.0 {
                    let mut t = schur.clone();
                    for i in 0..m {
                        t[(i, i)] += jitter;
                    }
                    Cholesky::new(t)
                } else {
                    Cholesky::new(schur.clone())
                };
                match trial {
                    Some(ch) => break ch,
                    None => {
                        jitter = if jitter == 0.0 { base * 1e-14 } else { jitter * 100.0 };
                        if jitter > base * 1e-4 {
                            return Err(SdpError::Numerical(
                                "Schur complement is numerically singular".into(),
                            ));
                        }
                    }
                }
            }
        };

        let a_zinv: Vec<f64> = rows.iter().map(|r| inner_asym(&r.entries, &z_inv)).collect();

        // One Newton solve for a given centering target and correction term.
        let solve_direction = |sigma_mu: f64,
                               corr_main: Option<&DMatrix<f64>>,
                               corr_sl: Option<&DVector<f64>>|
         -> Direction {
            // P = (S Rd + corr) Z^-1
            let mut inner = &s * &rd;
            if let Some(cm) = corr_main {
                inner += cm;
            }
            let p = &inner * &z_inv;
            let mut rhs = DVector::<f64>::zeros(m);
            for (i, row) in rows.iter().enumerate() {
                let mut v = sigma_mu * a_zinv[i] - row.b - inner_asym(&row.entries, &p);
                if row.slot != usize::MAX {
                    let j = row.slot;
                    let corr_j = corr_sl.map_or(0.0, |cs| cs[j]);
                    v += row.sig * (sigma_mu - corr_j - u[j] * rd_sl[j]) / w[j];
                }
                rhs[i] = v;
            }
            // Cholesky solve plus two rounds of iterative refinement; the
            // Schur complement turns severely ill-conditioned as mu -> 0 and
            // refinement buys the direction a few extra digits.
            let mut dy = schur_chol.solve(&rhs);
            for _ in 0..2 {
                let resid = &rhs - &schur * &dy;
                dy += schur_chol.solve(&resid);
            }
            let mut dz = rd.clone();
            for (i, row) in rows.iter().enumerate() {
                add_scaled(&row.entries, &mut dz, dy[i]);
            }
            let mut dw = DVector::<f64>::zeros(n_sl.max(1));
            let mut du = DVector::<f64>::zeros(n_sl.max(1));
            for (i, row) in rows.iter().enumerate() {
                if row.slot != usize::MAX {
                    let j = row.slot;
                    dw[j] = row.sig * dy[i] + rd_sl[j];
                    let corr_j = corr_sl.map_or(0.0, |cs| cs[j]);
                    du[j] = (sigma_mu - u[j] * w[j] - corr_j - u[j] * dw[j]) / w[j];
                }
            }
            let ds_raw = {
                let mut t = &z_inv * sigma_mu - &s - (&s * &dz) * &z_inv;
                if let Some(cm) = corr_main {
                    t -= cm * &z_inv;
                }
                // one more term: S Rd Z^-1 from dZ already contains Rd; the
                // expression above uses dz = sum dy A + Rd, so Rd is included.
                t
            };
            let ds = (&ds_raw + ds_raw.transpose()) * 0.5;
            (ds, du, dy, dz, dw)
        };

        // Predictor (affine scaling).
        let (ds_a, du_a, _dy_a, dz_a, dw_a) = solve_direction(0.0, None, None);
        let ap_a = max_psd_step(&s, &ds_a).min(max_pos_step(&u.rows(0, n_sl).into_owned(), &du_a.rows(0, n_sl).into_owned()));
        let ad_a = max_psd_step(&z, &dz_a).min(max_pos_step(&w.rows(0, n_sl).into_owned(), &dw_a.rows(0, n_sl).into_owned()));
        let mu_aff = {
            let s_n = &s + &ds_a * ap_a;
            let z_n = &z + &dz_a * ad_a;
            let mut acc = (s_n.component_mul(&z_n)).sum();
            for j in 0..n_sl {
                acc += (u[j] + ap_a * du_a[j]) * (w[j] + ad_a * dw_a[j]);
            }
            acc / deg
        };
        let mut sigma = ((mu_aff / mu).powi(3)).clamp(1e-8, 1.0);
        // Keep complementarity from outrunning feasibility: once mu dives far
        // below the residual level, the directions drown in roundoff and the
        // residuals freeze.
        if prim_inf.max(dual_inf) > 10.0 * opts.tol {
            sigma = sigma.max(0.1);
        }

        // Corrector, then up to two more second-order rounds kept only when
        // they enlarge the steps (cheap substitute for centrality correctors
        // on degenerate faces).
        let u_act = u.rows(0, n_sl).into_owned();
        let w_act = w.rows(0, n_sl).into_owned();
        let step_pair = |ds: &DMatrix<f64>, du: &DVector<f64>, dz: &DMatrix<f64>, dw: &DVector<f64>| {
            let ap = max_psd_step(&s, ds).min(max_pos_step(&u_act, &du.rows(0, n_sl).into_owned()));
            let ad = max_psd_step(&z, dz).min(max_pos_step(&w_act, &dw.rows(0, n_sl).into_owned()));
            (ap, ad)
        };

        let corr_main = &ds_a * &dz_a;
        let corr_sl = DVector::<f64>::from_fn(n_sl.max(1), |j, _| {
            if j < n_sl {
                du_a[j] * dw_a[j]
            } else {
                0.0
            }
        });
        let mut dir = solve_direction(sigma * mu, Some(&corr_main), Some(&corr_sl));
        let mut steps = step_pair(&dir.0, &dir.1, &dir.3, &dir.4);
        for _ in 0..2 {
            if steps.0.min(steps.1) > 0.85 {
                break;
            }
            let corr_main = &dir.0 * &dir.3;
            let corr_sl = DVector::<f64>::from_fn(n_sl.max(1), |j, _| {
                if j < n_sl {
                    dir.1[j] * dir.4[j]
                } else {
                    0.0
                }
            });
            let trial = solve_direction(sigma * mu, Some(&corr_main), Some(&corr_sl));
            let trial_steps = step_pair(&trial.0, &trial.1, &trial.3, &trial.4);
            if trial_steps.0.min(trial_steps.1) > 1.05 * steps.0.min(steps.1) {
                dir = trial;
                steps = trial_steps;
            } else {
                break;
            }
        }
        let (ds, du, dy, dz, dw) = dir;

        let tau = opts.step_frac;
        let ap = (tau * steps.0).min(1.0);
        let ad = (tau * steps.1).min(1.0);

        s += &ds * ap;
        z += &dz * ad;
        y += &dy * ad;
        for j in 0..n_sl {
            u[j] += ap * du[j];
            w[j] += ad * dw[j];
        }

        // Freeze recovery: an iterate pinned to the PSD boundary blocks all
        // further steps on its side. Only when genuinely stuck far from
        // convergence, nudge back to the interior — capped relative to the
        // current iterate so feasibility is not destroyed.
        let stuck = track > 1e3 * opts.tol;
        if ap < 1e-4 && stuck {
            let nudge = (0.1 * mu * deg / z.trace().max(1e-300))
                .min(1e-3 * s.trace() / d as f64);
            for i in 0..d {
                s[(i, i)] += nudge;
            }
            for j in 0..n_sl {
                u[j] += (0.1 * mu / w[j].max(1e-300)).min(1e-3 * u[j]);
            }
        }
        if ad < 1e-4 && stuck {
            let nudge = (0.1 * mu * deg / s.trace().max(1e-300))
                .min(1e-3 * z.trace() / d as f64);
            for i in 0..d {
                z[(i, i)] += nudge;
            }
            for j in 0..n_sl {
                w[j] += (0.1 * mu / u[j].max(1e-300)).min(1e-3 * w[j]);
            }
        }
    }

    if iterations >= opts.max_iter && status == SolveStatus::NumericalFailure {
        // Ran out of iterations; classify by how close we got.
        let pobj = (c_mat.component_mul(&s)).sum();
        let dobj: f64 = rows.iter().zip(y.iter()).map(|(r, &yi)| r.b * yi).sum();
        let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        status =
            if rel_gap <= opts.tol * 1e3 { SolveStatus::NearOptimal } else { SolveStatus::NumericalFailure };
    }

    // Prefer the best nearly-dual-feasible iterate for the certificate; the
    // verifier re-checks it from scratch either way.
    let final_dobj: f64 = rows.iter().zip(y.iter()).map(|(r, &yi)| r.b * yi).sum();
    let y_chosen: Vec<f64> = match &best_dual {
        Some((v, yb)) if *v < final_dobj => yb.clone(),
        _ => y.iter().cloned().collect(),
    };

    // Back to original units.
    let y_orig: Vec<f64> =
        rows.iter().zip(&y_chosen).map(|(r, &yi)| yi * r.scale).collect();
    let pobj = (c_mat.component_mul(&s)).sum() * c_scale;
    let dobj: f64 =
        rows.iter().zip(&y_chosen).map(|(r, &yi)| r.b * yi).sum::<f64>() * c_scale;

    let certificate = match status {
        SolveStatus::Infeasible | SolveStatus::Unbounded => None,
        _ => Some(verify_certificate(problem, &y_orig, opts.cert_margin)),
    };
    // A run the iteration metrics called a failure still ends well when the
    // retained dual iterate verifies independently and sits close to the
    // primal estimate.
    if status == SolveStatus::NumericalFailure {
        if let Some(cert) = &certificate {
            if cert.verified
                && (cert.bound - pobj).abs() <= 1e3 * opts.tol * (1.0 + pobj.abs() + cert.bound.abs())
            {
                status = SolveStatus::NearOptimal;
            }
        }
    }
    let certificate = match status {
        SolveStatus::Optimal | SolveStatus::NearOptimal => certificate,
        _ => None,
    };

    Ok(Solution {
        status,
        primal_value: pobj,
        dual_value: dobj,
        multipliers: y_orig,
        certificate,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::conic::{ConstraintClass, SymMat};
    use approx::assert_relative_eq;

    fn unit(dim: usize, r: usize, c: usize, v: f64) -> SymMat {
        let mut m = SymMat::new(dim);
        m.push(r, c, v);
        m
    }

    #[test]
    fn scalar_equality() {
        // max x s.t. x = 0.3, x >= 0 (as 1x1 PSD).
        let mut p = ConicProblem::new(1);
        p.objective.push(0, 0, 1.0);
        p.add_constraint(unit(1, 0, 0, 1.0), Sense::Eq, 0.3, ConstraintClass::Fixed);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_relative_eq!(sol.primal_value, 0.3, epsilon = 1e-7);
        let cert = sol.certificate.unwrap();
        assert!(cert.verified);
        assert_relative_eq!(cert.bound, 0.3, epsilon = 1e-6);
        // The multiplier recovers the bound: nu = 1.
        assert_relative_eq!(sol.multipliers[0], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn scalar_inequality() {
        // max x s.t. x <= 0.7.
        let mut p = ConicProblem::new(1);
        p.objective.push(0, 0, 1.0);
        p.add_constraint(unit(1, 0, 0, 1.0), Sense::Le, 0.7, ConstraintClass::Fixed);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_relative_eq!(sol.primal_value, 0.7, epsilon = 1e-7);
        assert!(sol.certificate.unwrap().verified);
    }

    #[test]
    fn diagonal_trace_objective() {
        // max tr(X) s.t. X00 = 1, X11 = 2 -> 3.
        let mut p = ConicProblem::new(2);
        p.objective.push(0, 0, 1.0);
        p.objective.push(1, 1, 1.0);
        p.add_constraint(unit(2, 0, 0, 1.0), Sense::Eq, 1.0, ConstraintClass::Fixed);
        p.add_constraint(unit(2, 1, 1, 1.0), Sense::Eq, 2.0, ConstraintClass::Fixed);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_relative_eq!(sol.primal_value, 3.0, epsilon = 1e-6);
    }

    #[test]
    fn off_diagonal_capped_by_psd() {
        // max 2 X01 s.t. X00 = 1, X11 = 4: optimum 2*sqrt(1*4) = 4 on the
        // PSD boundary.
        let mut p = ConicProblem::new(2);
        p.objective.push(0, 1, 1.0); // symmetric entry => tr = 2 X01
        p.add_constraint(unit(2, 0, 0, 1.0), Sense::Eq, 1.0, ConstraintClass::Fixed);
        p.add_constraint(unit(2, 1, 1, 1.0), Sense::Eq, 4.0, ConstraintClass::Fixed);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_relative_eq!(sol.primal_value, 4.0, epsilon = 1e-6);
        assert!(sol.certificate.unwrap().verified);
    }

    #[test]
    fn mixed_senses_and_gap() {
        // max X01 + X10 + 0.5 X11 over X PSD with
        //   X00 <= 1, X11 = 1, X01 >= -0.2 (inactive at the optimum).
        let mut p = ConicProblem::new(2);
        p.objective.push(0, 1, 1.0);
        p.objective.push(1, 1, 0.5);
        p.add_constraint(unit(2, 0, 0, 1.0), Sense::Le, 1.0, ConstraintClass::Fixed);
        p.add_constraint(unit(2, 1, 1, 1.0), Sense::Eq, 1.0, ConstraintClass::Fixed);
        p.add_constraint(unit(2, 0, 1, 1.0), Sense::Ge, -0.4, ConstraintClass::Fixed);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        // Optimum: X = [[1, 1], [1, 1]], objective 2.5.
        assert_relative_eq!(sol.primal_value, 2.5, epsilon = 1e-6);
        let cert = sol.certificate.unwrap();
        assert!(cert.verified);
        assert!((sol.dual_value - sol.primal_value).abs() <= 1e-6);
    }

    #[test]
    fn primal_infeasible_detected() {
        // x = -1 with x >= 0 is infeasible.
        let mut p = ConicProblem::new(1);
        p.objective.push(0, 0, 1.0);
        p.add_constraint(unit(1, 0, 0, 1.0), Sense::Eq, -1.0, ConstraintClass::Fixed);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
        assert!(sol.certificate.is_none());
    }

    #[test]
    fn objective_scaling_scales_bound_exactly() {
        let build = |scale: f64| {
            let mut p = ConicProblem::new(2);
            p.objective.push(0, 1, scale);
            p.add_constraint(unit(2, 0, 0, 1.0), Sense::Eq, 1.0, ConstraintClass::Fixed);
            p.add_constraint(unit(2, 1, 1, 1.0), Sense::Eq, 1.0, ConstraintClass::Fixed);
            p
        };
        let sol_1 = solve(&build(1.0), &SolverOptions::default()).unwrap();
        let sol_3 = solve(&build(3.0), &SolverOptions::default()).unwrap();
        let b1 = sol_1.certificate.unwrap().bound;
        let b3 = sol_3.certificate.unwrap().bound;
        assert_relative_eq!(b3, 3.0 * b1, max_relative = 1e-6);
    }

    #[test]
    fn adding_constraints_never_raises_verified_bound() {
        // Nested feasible sets: tightening can only lower the certified max.
        let mut loose = ConicProblem::new(2);
        loose.objective.push(0, 1, 1.0);
        loose.add_constraint(unit(2, 0, 0, 1.0), Sense::Eq, 1.0, ConstraintClass::Fixed);
        loose.add_constraint(unit(2, 1, 1, 1.0), Sense::Eq, 1.0, ConstraintClass::Fixed);
        let mut tight = loose.clone();
        tight.add_constraint(unit(2, 0, 1, 1.0), Sense::Le, 0.3, ConstraintClass::Fixed);
        let b_loose = solve(&loose, &SolverOptions::default()).unwrap().certificate.unwrap().bound;
        let b_tight = solve(&tight, &SolverOptions::default()).unwrap().certificate.unwrap().bound;
        assert!(b_tight <= b_loose + 1e-7, "tight {b_tight} vs loose {b_loose}");
    }

    #[test]
    fn gap_within_ten_tolerances() {
        let mut p = ConicProblem::new(3);
        p.objective.push(0, 1, 1.0);
        p.objective.push(1, 2, -0.5);
        p.objective.push(2, 2, 0.25);
        for i in 0..3 {
            p.add_constraint(unit(3, i, i, 1.0), Sense::Eq, 1.0 + i as f64, ConstraintClass::Fixed);
        }
        p.add_constraint(unit(3, 0, 2, 1.0), Sense::Le, 0.5, ConstraintClass::Fixed);
        let opts = SolverOptions::default();
        let sol = solve(&p, &opts).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_value - sol.dual_value).abs() <= 10.0 * opts.tol * (1.0 + sol.primal_value.abs()));
    }
}
