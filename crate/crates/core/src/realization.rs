//! Explicit finite-dimensional models of the prepare-and-measure scenario.
//!
//! A [`Realization`] carries concrete states on a tensor product H_B (x) H_E,
//! Bob operators acting on the first factor and Eve operators on the second,
//! so every moment <psi_i| S_k^dag S_l |psi_j> can be evaluated numerically.
//! These models serve as independent oracles: any realization is feasible for
//! the moment relaxation built from its own Gram matrix and statistics, and
//! honest-strategy values give certified-bound sandwiches.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::RngExt;

use crate::moment::monomial::{Generator, Monomial};
use crate::protocol::ProtocolSpec;
use crate::stats::StatTable;

type CVec = DVector<Complex64>;
type CMat = DMatrix<Complex64>;

/// States plus measurement operators on H_B (x) H_E. Operators need not be
/// projective (sub-normalized POVM elements are allowed); feasibility oracles
/// that exercise the projector algebra construct projective instances.
#[derive(Debug, Clone)]
pub struct Realization {
    pub dim_b: usize,
    pub dim_e: usize,
    /// n states, each of dimension dim_b * dim_e, unit norm.
    pub states: Vec<CVec>,
    /// Bob's outcome-0 operators, dim_b x dim_b.
    pub bob: Vec<CMat>,
    /// Eve's outcome-0 operators, dim_e x dim_e; one per encoding pair.
    pub eve: Vec<CMat>,
}

impl Realization {
    /// Apply one generator to a joint-space vector.
    fn apply_generator(&self, g: Generator, v: &CVec) -> CVec {
        let (db, de) = (self.dim_b, self.dim_e);
        let mut out = CVec::zeros(db * de);
        match g {
            Generator::B(y) => {
                let op = &self.bob[y as usize];
                for a in 0..db {
                    for ap in 0..de {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for b in 0..db {
                            acc += op[(a, b)] * v[b * de + ap];
                        }
                        out[a * de + ap] = acc;
                    }
                }
            }
            Generator::E(z) => {
                let op = &self.eve[z as usize];
                for a in 0..db {
                    for e in 0..de {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for ep in 0..de {
                            acc += op[(e, ep)] * v[a * de + ep];
                        }
                        out[a * de + e] = acc;
                    }
                }
            }
        }
        out
    }

    /// W |v> for a word W (letters applied right to left).
    pub fn apply_word(&self, word: &Monomial, v: &CVec) -> CVec {
        let mut cur = v.clone();
        for g in word.letters().iter().rev() {
            cur = self.apply_generator(*g, &cur);
        }
        cur
    }

    /// <psi_i| W |psi_j>.
    pub fn moment(&self, i: usize, word: &Monomial, j: usize) -> Complex64 {
        let wv = self.apply_word(word, &self.states[j]);
        self.states[i].dotc(&wv)
    }

    /// Gram matrix of the states.
    pub fn gram(&self) -> CMat {
        let n = self.states.len();
        CMat::from_fn(n, n, |i, j| self.states[i].dotc(&self.states[j]))
    }

    /// Conditional click statistics p(0|x,y) = <psi_x| B_y (x) 1 |psi_x>.
    pub fn statistics(&self, spec: &ProtocolSpec) -> StatTable {
        let n = self.states.len();
        let mut p0 = vec![0.0; n * n];
        for x in 0..n {
            for y in 0..n {
                let v = self.moment(x, &Monomial::generator(Generator::B(y as u8)), x);
                p0[x * n + y] = v.re.clamp(0.0, 1.0);
            }
        }
        StatTable::from_probs(spec.input_weights(), p0).expect("realization statistics are valid")
    }

    /// The full moment matrix over a monomial basis: block (i, j), entry
    /// (k, l) is <psi_i| S_k^dag S_l |psi_j>; rows are indexed i*q + k.
    pub fn moment_matrix(&self, basis: &[Monomial]) -> CMat {
        let n = self.states.len();
        let q = basis.len();
        // Precompute S_k |psi_i> for all (i, k).
        let mut vecs = Vec::with_capacity(n * q);
        for psi in &self.states {
            for word in basis {
                vecs.push(self.apply_word(word, psi));
            }
        }
        CMat::from_fn(n * q, n * q, |r, c| vecs[r].dotc(&vecs[c]))
    }

    /// Eve's joint guess-and-succeed probability for this realization:
    /// sum_r p_R sum_k p_K sum_{y in r} p_Y <psi_{r_k}| B_y (x) E_{k|r} |psi_{r_k}>
    /// with E_{1|r} = 1 - E_{0|r}.
    pub fn joint_guess_value(&self, spec: &ProtocolSpec) -> f64 {
        let mut acc = 0.0;
        for (ri, &(r0, r1)) in spec.pairs().iter().enumerate() {
            for (k, &rk) in [r0, r1].iter().enumerate() {
                for y in [r0, r1] {
                    let w = spec.p_r()[ri] * spec.p_k()[k] * spec.p_y()[y];
                    let b_word = Monomial::generator(Generator::B(y as u8));
                    let be_word = b_word.product(&Monomial::generator(Generator::E(ri as u8)));
                    let be = self.moment(rk, &be_word, rk).re;
                    let v = if k == 0 { be } else { self.moment(rk, &b_word, rk).re - be };
                    acc += w * v;
                }
            }
        }
        acc
    }

    /// p(succ) of this realization under the protocol's inputs.
    pub fn success_value(&self, spec: &ProtocolSpec) -> f64 {
        let mut acc = 0.0;
        for (ri, &(r0, r1)) in spec.pairs().iter().enumerate() {
            for (k, &rk) in [r0, r1].iter().enumerate() {
                for y in [r0, r1] {
                    let w = spec.p_r()[ri] * spec.p_k()[k] * spec.p_y()[y];
                    acc += w * self.moment(rk, &Monomial::generator(Generator::B(y as u8)), rk).re;
                }
            }
        }
        acc
    }

    /// Random projective realization: Haar-ish random states, random rank-r
    /// projectors for Bob and Eve. All the projector-algebra identities the
    /// relaxation encodes hold exactly for these instances.
    pub fn random_projective<R: RngExt>(
        spec: &ProtocolSpec,
        dim_b: usize,
        dim_e: usize,
        rank_b: usize,
        rank_e: usize,
        rng: &mut R,
    ) -> Self {
        let n = spec.n();
        let dim = dim_b * dim_e;
        let gauss = |r: &mut R| {
            Complex64::new(
                r.sample(rand_distr::StandardNormal),
                r.sample(rand_distr::StandardNormal),
            )
        };
        let states = (0..n)
            .map(|_| {
                let mut v = CVec::from_fn(dim, |_, _| gauss(rng));
                let norm = v.norm();
                v /= Complex64::new(norm, 0.0);
                v
            })
            .collect();
        let projector = |d: usize, rank: usize, r: &mut R| -> CMat {
            let g = CMat::from_fn(d, rank, |_, _| gauss(r));
            let q = g.qr().q();
            &q * q.adjoint()
        };
        let bob = (0..n).map(|_| projector(dim_b, rank_b, rng)).collect();
        let eve = (0..spec.num_pairs()).map(|_| projector(dim_e, rank_e, rng)).collect();
        Self { dim_b, dim_e, states, bob, eve }
    }

    /// Brute-force qubit model of the honest two-state protocol over a lossy
    /// channel: states with the ideal overlap, Bob's conclusive operators
    /// scaled projectors onto the orthogonal polarizations reproducing the
    /// ideal statistics, Eve ignorant (E = 1/2). Panics if n != 2.
    pub fn honest_qubit(spec: &ProtocolSpec, eta: f64) -> Self {
        assert_eq!(spec.n(), 2, "the qubit construction is for the two-state protocol");
        let gamma = (-2.0 * spec.mu() * (0.5 * spec.theta()).sin().powi(2)).exp();
        let s = (1.0 - gamma * gamma).sqrt();
        let c = |re: f64| Complex64::new(re, 0.0);
        let states =
            vec![CVec::from_vec(vec![c(1.0), c(0.0)]), CVec::from_vec(vec![c(gamma), c(s)])];
        // p(0 | x != y) = 1 - exp(-eta mu sin^2 theta) <= 1 - gamma^2, so the
        // scale factor stays in [0, 1] and each operator is a POVM element.
        let p_click = -(-eta * spec.mu() * spec.theta().sin().powi(2)).exp_m1();
        let beta = if s > 0.0 { p_click / (s * s) } else { 0.0 };
        assert!(
            (0.0..=1.0 + 1e-12).contains(&beta),
            "conclusive weight {beta} must be a valid POVM scale"
        );
        let perp0 = CVec::from_vec(vec![c(0.0), c(1.0)]);
        let perp1 = CVec::from_vec(vec![c(-s), c(gamma)]);
        let bob =
            vec![&perp0 * perp0.adjoint() * c(beta), &perp1 * perp1.adjoint() * c(beta)];
        let eve = vec![CMat::from_element(1, 1, c(0.5))];
        Self { dim_b: 2, dim_e: 1, states, bob, eve }
    }
}
