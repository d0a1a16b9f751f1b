//! Regularized incomplete beta function, its inverse, and one-sided
//! Clopper-Pearson binomial tail bounds.
//!
//! Everything here is evaluated from scratch (Lanczos log-gamma, Lentz
//! continued fraction, safeguarded Newton inversion) so that the statistical
//! layer of the security analysis does not depend on solver internals or on
//! third-party special-function code.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BetaError {
    #[error("invalid shape parameters a={a}, b={b}")]
    InvalidShape { a: f64, b: f64 },
    #[error("invalid tail target {0}; must lie in (0, 1)")]
    InvalidTarget(f64),
    #[error("invalid counts: successes {s} out of {n} trials")]
    InvalidCounts { s: u64, n: u64 },
}

/// Lanczos approximation of ln Γ(x), x > 0. Accurate to ~1e-14 relative.
pub fn ln_gamma(x: f64) -> f64 {
    // g = 7, n = 9 coefficient set, quoted at published precision.
    #[allow(clippy::excessive_precision)]
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    assert!(x > 0.0, "ln_gamma requires x > 0, got {x}");
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx).
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued-fraction kernel for the incomplete beta (Lentz's algorithm).
fn beta_cont_frac(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 500;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;

    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;

    for m in 1..=MAX_ITER {
        let m_f = m as f64;
        let m2 = 2.0 * m_f;

        let aa = m_f * (b - m_f) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m_f) * (qab + m_f) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;

        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b), a, b > 0, x in [0, 1].
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> Result<f64, BetaError> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(BetaError::InvalidShape { a, b });
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x >= 1.0 {
        return Ok(1.0);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The continued fraction converges fast for x < (a+1)/(a+b+2); use the
    // symmetry I_x(a,b) = 1 - I_{1-x}(b,a) otherwise.
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_cont_frac(a, b, x) / a)
    } else {
        Ok(1.0 - front * beta_cont_frac(b, a, 1.0 - x) / b)
    }
}

/// Inverse of the regularized incomplete beta: the x with I_x(a, b) = p.
///
/// Safeguarded Newton iteration on a bisection bracket; the result satisfies
/// |I_x(a,b) - p| at the limit of what f64 evaluation of I allows.
pub fn inv_reg_inc_beta(a: f64, b: f64, p: f64) -> Result<f64, BetaError> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(BetaError::InvalidShape { a, b });
    }
    if !(p > 0.0 && p < 1.0) {
        if p == 0.0 {
            return Ok(0.0);
        }
        if p == 1.0 {
            return Ok(1.0);
        }
        return Err(BetaError::InvalidTarget(p));
    }

    let ln_norm = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    // Crude starting point: mean of the Beta(a,b) distribution.
    let mut x = (a / (a + b)).clamp(1e-12, 1.0 - 1e-12);

    for _ in 0..200 {
        let f = reg_inc_beta(a, b, x)? - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if f.abs() < 1e-16 {
            break;
        }
        // Newton step with the analytic density, in log space for stability.
        let ln_pdf = ln_norm + (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln();
        let mut next = x - f * (-ln_pdf).exp();
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-17 + 1e-16 * x.abs() {
            x = next;
            break;
        }
        x = next;
    }
    Ok(x)
}

/// Direction of a one-sided binomial confidence bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailDirection {
    Upper,
    Lower,
}

/// One-sided Clopper-Pearson bound on a binomial success probability.
///
/// With `s` observed successes in `n` trials, the upper bound at confidence
/// 1 - alpha is the x solving I_x(s+1, n-s) = 1 - alpha, and the lower bound
/// solves I_x(s, n-s+1) = alpha; the degenerate cases s = n (upper) and s = 0
/// (lower) return 1 and 0.
pub fn clopper_pearson(
    s: u64,
    n: u64,
    alpha: f64,
    direction: TailDirection,
) -> Result<f64, BetaError> {
    if n == 0 || s > n {
        return Err(BetaError::InvalidCounts { s, n });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(BetaError::InvalidTarget(alpha));
    }
    let sn = s as f64;
    let nn = n as f64;
    match direction {
        TailDirection::Upper => {
            if s == n {
                Ok(1.0)
            } else {
                // 1 - I^{-1}_alpha(n - s, s + 1), the form the lower bound
                // takes on the complementary outcome.
                Ok(1.0 - inv_reg_inc_beta(nn - sn, sn + 1.0, alpha)?)
            }
        }
        TailDirection::Lower => {
            if s == 0 {
                Ok(0.0)
            } else {
                Ok(inv_reg_inc_beta(sn, nn - sn + 1.0, alpha)?)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0_f64;
        for k in 1..15u32 {
            assert_relative_eq!(ln_gamma(k as f64 + 1.0), fact.ln(), max_relative = 1e-13);
            fact *= (k + 1) as f64;
        }
        // Γ(1/2) = sqrt(π)
        assert_relative_eq!(
            ln_gamma(0.5),
            std::f64::consts::PI.sqrt().ln(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn inc_beta_closed_forms() {
        // I_x(1, n) = 1 - (1-x)^n
        for &(x, n) in &[(0.1, 4.0), (0.35, 11.0), (0.8, 2.0)] {
            assert_relative_eq!(
                reg_inc_beta(1.0, n, x).unwrap(),
                1.0 - (1.0 - x).powf(n),
                max_relative = 1e-12
            );
        }
        // I_x(a, 1) = x^a
        assert_relative_eq!(
            reg_inc_beta(3.0, 1.0, 0.7).unwrap(),
            0.7f64.powi(3),
            max_relative = 1e-12
        );
        // Symmetric case: I_{1/2}(a, a) = 1/2
        assert_relative_eq!(reg_inc_beta(5.5, 5.5, 0.5).unwrap(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn inverse_round_trip() {
        let cases = [
            (1.0, 100.0, 0.05),
            (2.5, 7.0, 0.5),
            (40.0, 4000.0, 1e-9),
            (491_400.0, 1_308_601.0, 1e-9),
            (0.5, 0.5, 0.123),
            (12.0, 1.0, 0.9),
        ];
        for &(a, b, p) in &cases {
            let x = inv_reg_inc_beta(a, b, p).unwrap();
            let back = reg_inc_beta(a, b, x).unwrap();
            assert!(
                (back - p).abs() <= 1e-10 * p.max(1e-3),
                "round trip failed: a={a} b={b} p={p} x={x} back={back}"
            );
        }
    }

    #[test]
    fn clopper_pearson_zero_successes_closed_form() {
        // Upper bound with s = 0: 1 - alpha^(1/N).
        for &(n, alpha) in &[(100u64, 0.05), (1000, 1e-6), (17, 0.3)] {
            let got = clopper_pearson(0, n, alpha, TailDirection::Upper).unwrap();
            let want = 1.0 - alpha.powf(1.0 / n as f64);
            assert!(
                (got - want).abs() < 1e-10,
                "n={n} alpha={alpha}: got {got}, want {want}"
            );
        }
        // Reference value for (0, 100, 0.05).
        let v = clopper_pearson(0, 100, 0.05, TailDirection::Upper).unwrap();
        assert_relative_eq!(v, 0.029513, max_relative = 1e-4);
    }

    #[test]
    fn clopper_pearson_degenerate_and_ordering() {
        assert_eq!(clopper_pearson(5, 5, 0.01, TailDirection::Upper).unwrap(), 1.0);
        assert_eq!(clopper_pearson(0, 5, 0.01, TailDirection::Lower).unwrap(), 0.0);
        for &(s, n) in &[(3u64, 10u64), (0, 10), (10, 10), (500, 1000)] {
            let up = clopper_pearson(s, n, 0.05, TailDirection::Upper).unwrap();
            let lo = clopper_pearson(s, n, 0.05, TailDirection::Lower).unwrap();
            let f = s as f64 / n as f64;
            assert!(lo <= f + 1e-12 && f <= up + 1e-12, "bounds straddle: {lo} {f} {up}");
            assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&up));
        }
    }

    #[test]
    fn clopper_pearson_tightens_with_n() {
        // At fixed frequency, the one-sided bounds shrink toward s/N.
        let mut prev_width = f64::INFINITY;
        for &n in &[40u64, 400, 4000, 40000] {
            let s = n / 4;
            let up = clopper_pearson(s, n, 0.01, TailDirection::Upper).unwrap();
            let lo = clopper_pearson(s, n, 0.01, TailDirection::Lower).unwrap();
            let width = up - lo;
            assert!(width < prev_width);
            prev_width = width;
        }
        // Large-N consistency: both bounds approach 1/2 at f = 1/2.
        let up = clopper_pearson(500_000, 1_000_000, 0.05, TailDirection::Upper).unwrap();
        let lo = clopper_pearson(500_000, 1_000_000, 0.05, TailDirection::Lower).unwrap();
        assert!((up - 0.5).abs() < 2e-3 && (lo - 0.5).abs() < 2e-3);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(clopper_pearson(6, 5, 0.05, TailDirection::Upper).is_err());
        assert!(clopper_pearson(1, 0, 0.05, TailDirection::Upper).is_err());
        assert!(clopper_pearson(1, 5, 0.0, TailDirection::Upper).is_err());
        assert!(reg_inc_beta(-1.0, 2.0, 0.5).is_err());
        assert!(inv_reg_inc_beta(1.0, 2.0, 1.5).is_err());
    }
}
