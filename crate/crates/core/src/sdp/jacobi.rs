//! Cyclic Jacobi eigensolver for dense real symmetric matrices.
//!
//! Deliberately self-contained: certificate verification must not share a
//! code path with the interior-point solver or its linear algebra, so the
//! slack-matrix spectrum is computed here from first principles. Jacobi
//! rotations converge unconditionally for symmetric matrices and deliver
//! small eigenvalues with high relative accuracy, which is what the
//! feasibility margin check needs.

/// All eigenvalues of a symmetric matrix, ascending. `a` is given row-major.
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    assert_eq!(a.len(), n * n, "matrix must be n x n");
    let mut m = a.to_vec();
    // Symmetrize defensively; callers pass matrices that are symmetric up to
    // rounding.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[i * n + j] + m[j * n + i]);
            m[i * n + j] = avg;
            m[j * n + i] = avg;
        }
    }

    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() < 1e-15 * (1.0 + frob(&m, n)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                // Skip rotations that cannot change anything at f64 scale.
                if apq.abs() <= 1e-300 || apq.abs() < 1e-18 * (app.abs() + aqq.abs()) {
                    m[p * n + q] = 0.0;
                    m[q * n + p] = 0.0;
                    continue;
                }
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Apply the rotation to rows/columns p and q.
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
            }
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eig
}

fn frob(m: &[f64], n: usize) -> f64 {
    m.iter().take(n * n).map(|v| v * v).sum::<f64>().sqrt()
}
