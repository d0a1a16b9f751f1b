//! The n-state coherent-polarization protocol.
//!
//! Alice prepares weak coherent pulses in one of n polarizations
//! phi_x = cos(theta/2)|H> + sin(theta/2) e^{i x dphi}|V> at mean photon
//! number mu; Bob projects onto the polarization orthogonal to phi_y and
//! announces a conclusive outcome (b = 0) on a click. The security assumption
//! is the Gram matrix of pairwise overlaps of the prepared states.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::stats::{InputWeights, StatError, StatTable};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("state count n={0} must be at least 2")]
    BadStateCount(usize),
    #[error("{name} = {value} outside its valid range {range}")]
    BadParameter { name: &'static str, value: f64, range: &'static str },
    #[error("distribution {name} must be nonnegative and sum to 1")]
    BadDistribution { name: &'static str },
    #[error("protocol is degenerate: p(succ) = 0, QBER undefined")]
    DegenerateProtocol,
    #[error("overlap matrix is not a valid Gram matrix: {0}")]
    BadGram(String),
    #[error(transparent)]
    Stats(#[from] StatError),
}

/// Protocol parameters: state count, polar angle, intensity, azimuthal
/// spacing, and the input distributions for key bit, pair choice and
/// measurement setting.
#[derive(Debug, Clone)]
pub struct ProtocolSpec {
    n: usize,
    theta: f64,
    mu: f64,
    phase_step: f64,
    p_k: Vec<f64>,
    p_y: Vec<f64>,
    p_r: Vec<f64>,
    pairs: Vec<(usize, usize)>,
}

fn check_distribution(name: &'static str, p: &[f64]) -> Result<(), ProtocolError> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|&v| v < 0.0 || !v.is_finite()) || (sum - 1.0).abs() > 1e-9 {
        return Err(ProtocolError::BadDistribution { name });
    }
    Ok(())
}

impl ProtocolSpec {
    /// Uniform-input protocol with the default azimuthal spacing 2 pi / n.
    pub fn new(n: usize, theta: f64, mu: f64) -> Result<Self, ProtocolError> {
        if n < 2 {
            return Err(ProtocolError::BadStateCount(n));
        }
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(ProtocolError::BadParameter {
                name: "theta",
                value: theta,
                range: "[0, pi]",
            });
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(ProtocolError::BadParameter { name: "mu", value: mu, range: "[0, inf)" });
        }
        let pairs: Vec<(usize, usize)> =
            (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).collect();
        let m = pairs.len();
        Ok(Self {
            n,
            theta,
            mu,
            phase_step: 2.0 * std::f64::consts::PI / n as f64,
            p_k: vec![0.5; 2],
            p_y: vec![1.0 / n as f64; n],
            p_r: vec![1.0 / m as f64; m],
            pairs,
        })
    }

    pub fn with_phase_step(mut self, phase_step: f64) -> Result<Self, ProtocolError> {
        if !(phase_step > 0.0 && phase_step <= 2.0 * std::f64::consts::PI) {
            return Err(ProtocolError::BadParameter {
                name: "phase_step",
                value: phase_step,
                range: "(0, 2 pi]",
            });
        }
        self.phase_step = phase_step;
        Ok(self)
    }

    pub fn with_distributions(
        mut self,
        p_k: Vec<f64>,
        p_y: Vec<f64>,
        p_r: Vec<f64>,
    ) -> Result<Self, ProtocolError> {
        if p_k.len() != 2 || p_y.len() != self.n || p_r.len() != self.pairs.len() {
            return Err(ProtocolError::BadDistribution { name: "input" });
        }
        check_distribution("p_K", &p_k)?;
        check_distribution("p_Y", &p_y)?;
        check_distribution("p_R", &p_r)?;
        self.p_k = p_k;
        self.p_y = p_y;
        self.p_r = p_r;
        Ok(self)
    }

    pub fn with_mu(mut self, mu: f64) -> Result<Self, ProtocolError> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(ProtocolError::BadParameter { name: "mu", value: mu, range: "[0, inf)" });
        }
        self.mu = mu;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn phase_step(&self) -> f64 {
        self.phase_step
    }
    pub fn p_k(&self) -> &[f64] {
        &self.p_k
    }
    pub fn p_y(&self) -> &[f64] {
        &self.p_y
    }
    pub fn p_r(&self) -> &[f64] {
        &self.p_r
    }

    /// Encoding pairs r = (r0, r1), all 0 <= r0 < r1 <= n-1 in lexicographic
    /// order; there are n(n-1)/2 of them.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// Azimuth of state x.
    pub fn azimuth(&self, x: usize) -> f64 {
        x as f64 * self.phase_step
    }

    /// Marginal probability that Alice's emitted state is x.
    pub fn p_x_marginal(&self, x: usize) -> f64 {
        self.pairs
            .iter()
            .zip(&self.p_r)
            .map(|(&(r0, r1), &pr)| {
                let mut v = 0.0;
                if r0 == x {
                    v += pr * self.p_k[0];
                }
                if r1 == x {
                    v += pr * self.p_k[1];
                }
                v
            })
            .sum()
    }

    /// Sifting weight W(x, y): the probability mass with which the cell
    /// (x, y) enters p(succ) = sum_{x,y} W(x,y) p(0|x,y). The diagonal
    /// W(x, x) is also the weight of a sifted key error.
    pub fn sift_weight(&self, x: usize, y: usize) -> f64 {
        self.pairs
            .iter()
            .zip(&self.p_r)
            .map(|(&(r0, r1), &pr)| {
                if y != r0 && y != r1 {
                    return 0.0;
                }
                let mut v = 0.0;
                if r0 == x {
                    v += pr * self.p_k[0];
                }
                if r1 == x {
                    v += pr * self.p_k[1];
                }
                v * self.p_y[y]
            })
            .sum()
    }

    /// Input weights inherited by statistics tables built for this protocol.
    pub fn input_weights(&self) -> InputWeights {
        let n = self.n;
        let p_x = (0..n).map(|x| self.p_x_marginal(x)).collect();
        let sift =
            (0..n * n).map(|i| self.sift_weight(i / n, i % n)).collect();
        InputWeights { p_x, p_y: self.p_y.clone(), sift }
    }

    /// Jones vector of the polarization phi_x.
    pub fn polarization(&self, x: usize) -> [Complex64; 2] {
        let half = 0.5 * self.theta;
        [
            Complex64::new(half.cos(), 0.0),
            Complex64::from_polar(half.sin(), self.azimuth(x)),
        ]
    }
}

/// e^{i delta} with exact values at multiples of pi/2, so that protocols whose
/// overlaps are analytically real (n = 2) produce exactly real Gram matrices.
pub(crate) fn unit_phase(delta: f64) -> Complex64 {
    let k = delta / std::f64::consts::FRAC_PI_2;
    let kr = k.round();
    if (k - kr).abs() < 1e-12 {
        match (kr as i64).rem_euclid(4) {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    } else {
        Complex64::from_polar(1.0, delta)
    }
}

/// Gram matrix of Alice's preparations:
/// gamma_ij = exp(-mu sin^2(theta/2) (1 - e^{i dphi (j - i)})).
pub fn gram_matrix(spec: &ProtocolSpec) -> DMatrix<Complex64> {
    let n = spec.n();
    let s2 = (0.5 * spec.theta()).sin().powi(2);
    DMatrix::from_fn(n, n, |i, j| {
        let rot = unit_phase(spec.phase_step() * (j as f64 - i as f64));
        let exponent = -spec.mu() * s2 * (Complex64::new(1.0, 0.0) - rot);
        exponent.exp()
    })
}

/// How the overlap assumption enters the relaxation: exact equality on every
/// Gram entry, or a box of half-width epsilon around each real and imaginary
/// part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlapMode {
    Exact,
    Box,
}

/// Target overlaps plus the tolerance defining the overlap assumption.
#[derive(Debug, Clone)]
pub struct GramConstraint {
    gamma: DMatrix<Complex64>,
    epsilon: f64,
    mode: OverlapMode,
}

fn validate_gram(gamma: &DMatrix<Complex64>) -> Result<(), ProtocolError> {
    if gamma.nrows() != gamma.ncols() || gamma.nrows() < 2 {
        return Err(ProtocolError::BadGram(format!(
            "expected square matrix of size >= 2, got {}x{}",
            gamma.nrows(),
            gamma.ncols()
        )));
    }
    let n = gamma.nrows();
    for i in 0..n {
        if (gamma[(i, i)] - Complex64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(ProtocolError::BadGram(format!(
                "diagonal entry ({i},{i}) = {} is not 1",
                gamma[(i, i)]
            )));
        }
        for j in 0..n {
            if (gamma[(i, j)] - gamma[(j, i)].conj()).norm() > 1e-10 {
                return Err(ProtocolError::BadGram(format!("entry ({i},{j}) is not Hermitian")));
            }
        }
    }
    let eig = gamma.clone().symmetric_eigenvalues();
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-10 {
        return Err(ProtocolError::BadGram(format!("minimum eigenvalue {min} < 0")));
    }
    Ok(())
}

impl GramConstraint {
    pub fn exact(gamma: DMatrix<Complex64>) -> Result<Self, ProtocolError> {
        validate_gram(&gamma)?;
        Ok(Self { gamma, epsilon: 0.0, mode: OverlapMode::Exact })
    }

    pub fn boxed(gamma: DMatrix<Complex64>, epsilon: f64) -> Result<Self, ProtocolError> {
        validate_gram(&gamma)?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(ProtocolError::BadParameter {
                name: "epsilon",
                value: epsilon,
                range: "(0, inf)",
            });
        }
        Ok(Self { gamma, epsilon, mode: OverlapMode::Box })
    }

    /// Exact constraint at the protocol's ideal overlaps.
    pub fn ideal(spec: &ProtocolSpec) -> Self {
        // The closed-form Gram matrix is Hermitian unit-diagonal PSD by
        // construction; validation cannot fail here.
        Self::exact(gram_matrix(spec)).expect("ideal Gram matrix is valid")
    }

    /// Box constraint of half-width epsilon around the ideal overlaps.
    pub fn ideal_boxed(spec: &ProtocolSpec, epsilon: f64) -> Result<Self, ProtocolError> {
        Self::boxed(gram_matrix(spec), epsilon)
    }

    pub fn gamma(&self) -> &DMatrix<Complex64> {
        &self.gamma
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn mode(&self) -> OverlapMode {
        self.mode
    }
    pub fn n(&self) -> usize {
        self.gamma.nrows()
    }
}

/// Ideal (noise-free) statistics over a channel of transmission eta:
/// p(0|x,y) = 1 - exp(-eta mu |<phi_y_perp | phi_x>|^2), where the projected
/// intensity fraction is sin^2(theta) sin^2((x - y) dphi / 2).
pub fn ideal_statistics(spec: &ProtocolSpec, eta: f64) -> Result<StatTable, ProtocolError> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(ProtocolError::BadParameter { name: "eta", value: eta, range: "[0, 1]" });
    }
    let n = spec.n();
    let sin_theta2 = spec.theta().sin().powi(2);
    let mut p0 = vec![0.0; n * n];
    for x in 0..n {
        for y in 0..n {
            let half_delta = 0.5 * spec.phase_step() * (x as f64 - y as f64);
            let frac = sin_theta2 * half_delta.sin().powi(2);
            p0[x * n + y] = -(-eta * spec.mu() * frac).exp_m1();
        }
    }
    Ok(StatTable::from_probs(spec.input_weights(), p0)?)
}

/// Sifting summary: success probability and quantum bit error rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sifted {
    pub p_succ: f64,
    pub qber: f64,
}

/// Success probability and QBER of the sifted key.
///
/// A round is conclusive when b = 0 and Bob's setting matches the announced
/// pair; Bob infers k' = 1 if y = r0, else k' = 0. An error is therefore a
/// conclusive round with y equal to the index of the state actually sent.
pub fn sift(spec: &ProtocolSpec, table: &StatTable) -> Result<Sifted, ProtocolError> {
    let mut p_succ = 0.0;
    let mut err = 0.0;
    for ((&(r0, r1), &pr), _) in spec.pairs().iter().zip(spec.p_r()).zip(0..) {
        for (k, &rk) in [r0, r1].iter().enumerate() {
            let w = pr * spec.p_k()[k];
            for y in [r0, r1] {
                p_succ += w * spec.p_y()[y] * table.cond_p0(rk, y)?;
            }
            err += w * spec.p_y()[rk] * table.cond_p0(rk, rk)?;
        }
    }
    if p_succ <= 0.0 {
        return Err(ProtocolError::DegenerateProtocol);
    }
    Ok(Sifted { p_succ, qber: err / p_succ })
}
