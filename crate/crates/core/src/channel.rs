//! Lossy, noisy, dark-count-afflicted channel model and Monte Carlo round
//! simulation.
//!
//! Misalignment is modeled per round by a random polarization rotation of the
//! prepared state: polar angle delta ~ N(0, sigma^2) toward the orthogonal
//! polarization with uniform azimuth phi, on top of systematic offsets in the
//! polar angle (delta_theta) and in the relative azimuth (delta_xy). The
//! simulator samples this geometry exactly; the closed-form averaged intensity
//! serves as a cross-check oracle only.
//!
//! The rotation acts on the prepared state and loss is applied as an
//! intensity factor afterwards; for coherent states loss commutes with any
//! polarization rotation, so the order carries no physics (tested below).

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::protocol::{unit_phase, ProtocolSpec};
use crate::stats::StatTable;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("{name} = {value} outside its valid range {range}")]
    BadParameter { name: &'static str, value: f64, range: &'static str },
    #[error("simulation requires at least one round")]
    NoRounds,
    #[error("blinding schedule must be nonempty")]
    EmptySchedule,
}

/// End-to-end channel and detector model.
#[derive(Debug, Clone, Copy)]
pub struct ChannelModel {
    /// End-to-end transmission, detector efficiency included.
    pub eta: f64,
    /// Dark-count probability per detection gate.
    pub p_dc: f64,
    /// Standard deviation of the stochastic polar fluctuation (radians).
    pub sigma: f64,
    /// Systematic polar offset of Alice's preparation (radians).
    pub delta_theta: f64,
    /// Systematic azimuthal offset between preparation and measurement.
    pub delta_xy: f64,
}

impl ChannelModel {
    pub fn new(eta: f64, p_dc: f64, sigma: f64) -> Result<Self, ChannelError> {
        Self { eta, p_dc, sigma, delta_theta: 0.0, delta_xy: 0.0 }.validated()
    }

    /// Loss-only channel: no dark counts, no misalignment.
    pub fn lossy(eta: f64) -> Result<Self, ChannelError> {
        Self::new(eta, 0.0, 0.0)
    }

    pub fn with_systematics(mut self, delta_theta: f64, delta_xy: f64) -> Self {
        self.delta_theta = delta_theta;
        self.delta_xy = delta_xy;
        self
    }

    pub fn validated(self) -> Result<Self, ChannelError> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(ChannelError::BadParameter {
                name: "eta",
                value: self.eta,
                range: "[0, 1]",
            });
        }
        if !(0.0..1.0).contains(&self.p_dc) {
            return Err(ChannelError::BadParameter {
                name: "p_dc",
                value: self.p_dc,
                range: "[0, 1)",
            });
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(ChannelError::BadParameter {
                name: "sigma",
                value: self.sigma,
                range: "[0, inf)",
            });
        }
        Ok(self)
    }

    /// Copy with the transmission multiplied by `scale` (clamped to [0, 1]).
    pub fn scaled_eta(&self, scale: f64) -> Self {
        Self { eta: (self.eta * scale).clamp(0.0, 1.0), ..*self }
    }
}

/// One protocol round as sampled by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundRecord {
    pub round: u64,
    pub r: (u8, u8),
    pub k: u8,
    pub y: u8,
    pub b: u8,
    pub conclusive: bool,
}

fn jones(theta: f64, azimuth: f64) -> [Complex64; 2] {
    let half = 0.5 * theta;
    [Complex64::new(half.cos(), 0.0), unit_phase(azimuth) * half.sin()]
}

fn jones_perp(theta: f64, azimuth: f64) -> [Complex64; 2] {
    let half = 0.5 * theta;
    [-unit_phase(-azimuth) * half.sin(), Complex64::new(half.cos(), 0.0)]
}

fn inner(u: &[Complex64; 2], v: &[Complex64; 2]) -> Complex64 {
    u[0].conj() * v[0] + u[1].conj() * v[1]
}

/// Mean photon number in Bob's conclusive output port for one round with
/// fluctuation (delta, phi): prepare phi_x at polar angle theta + delta_theta,
/// rotate by delta toward the orthogonal polarization with azimuth phi, and
/// project onto phi_y_perp offset azimuthally by delta_xy. Includes eta.
pub fn detected_mean_photons(
    spec: &ProtocolSpec,
    model: &ChannelModel,
    x: usize,
    y: usize,
    fluct: (f64, f64),
) -> f64 {
    let (delta, phi) = fluct;
    let theta_a = spec.theta() + model.delta_theta;
    let az_x = spec.azimuth(x);
    let prepared = jones(theta_a, az_x);
    let prepared_perp = jones_perp(theta_a, az_x);
    let rot = unit_phase(phi) * delta.sin();
    let state = [
        prepared[0] * delta.cos() + prepared_perp[0] * rot,
        prepared[1] * delta.cos() + prepared_perp[1] * rot,
    ];
    let analyzer = jones_perp(spec.theta(), spec.azimuth(y) + model.delta_xy);
    model.eta * spec.mu() * inner(&analyzer, &state).norm_sqr()
}

/// Closed-form average of [`detected_mean_photons`] over delta ~ N(0, sigma^2)
/// and phi ~ U[0, 2 pi):
///
/// eta mu [ 1/2 (1 + e^{-2 sigma^2}) 2 r t (1 - cos D)
///        + 1/2 (1 - e^{-2 sigma^2}) (r^2 + t^2 + 2 r t cos D) ]
///
/// with r = sin^2(theta/2), t = cos^2(theta/2) and D the azimuthal difference
/// of x and y; generalizes to theta offsets through the two port intensities.
pub fn averaged_mean_photons(spec: &ProtocolSpec, model: &ChannelModel, x: usize, y: usize) -> f64 {
    let theta_a = spec.theta() + model.delta_theta;
    let (ra, ta) = ((0.5 * theta_a).sin().powi(2), (0.5 * theta_a).cos().powi(2));
    let (rb, tb) = ((0.5 * spec.theta()).sin().powi(2), (0.5 * spec.theta()).cos().powi(2));
    let d_az = spec.azimuth(x) - spec.azimuth(y) - model.delta_xy;
    // Conclusive-port intensity fraction and its orthogonal complement.
    let p_align = ta * rb + ra * tb - 2.0 * (ra * ta * rb * tb).sqrt() * d_az.cos();
    let damp = (-2.0 * model.sigma * model.sigma).exp();
    model.eta * spec.mu() * (0.5 * (1.0 + damp) * p_align + 0.5 * (1.0 - damp) * (1.0 - p_align))
}

/// Click probability of a gate: dark count OR-ed with the photon detection,
/// p = 1 - (1 - p_dc) exp(-mean_photons).
pub fn click_probability(mean_photons: f64, model: &ChannelModel) -> f64 {
    debug_assert!(mean_photons >= 0.0);
    1.0 - (1.0 - model.p_dc) * (-mean_photons).exp()
}

fn draw_discrete<R: RngExt>(rng: &mut R, dist: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    dist.len() - 1
}

const CHUNK_ROUNDS: u64 = 1 << 16;

fn simulate_chunk(
    spec: &ProtocolSpec,
    model: &ChannelModel,
    seed: u64,
    stream: u64,
    start: u64,
    rounds: u64,
) -> (Vec<RoundRecord>, Vec<u64>, Vec<u64>) {
    let n = spec.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut zero = vec![0u64; n * n];
    let mut one = vec![0u64; n * n];
    let mut records = Vec::with_capacity(rounds as usize);
    for i in 0..rounds {
        let ri = draw_discrete(&mut rng, spec.p_r());
        let (r0, r1) = spec.pairs()[ri];
        let k = draw_discrete(&mut rng, spec.p_k());
        let x = if k == 0 { r0 } else { r1 };
        let y = draw_discrete(&mut rng, spec.p_y());
        let z: f64 = rng.sample(StandardNormal);
        let delta = model.sigma * z;
        let phi: f64 = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
        let mean = detected_mean_photons(spec, model, x, y, (delta, phi));
        let p_click = click_probability(mean, model);
        let b = if rng.random::<f64>() < p_click { 0u8 } else { 1u8 };
        if b == 0 {
            zero[x * n + y] += 1;
        } else {
            one[x * n + y] += 1;
        }
        records.push(RoundRecord {
            round: start + i,
            r: (r0 as u8, r1 as u8),
            k: k as u8,
            y: y as u8,
            b,
            conclusive: b == 0 && (y == r0 || y == r1),
        });
    }
    (records, zero, one)
}

fn simulate_with_streams(
    spec: &ProtocolSpec,
    model: &ChannelModel,
    rounds: u64,
    seed: u64,
    stream_base: u64,
    keep_records: bool,
) -> (Vec<RoundRecord>, StatTable, u64) {
    let n = spec.n();
    let n_chunks = rounds.div_ceil(CHUNK_ROUNDS);
    let chunks: Vec<(Vec<RoundRecord>, Vec<u64>, Vec<u64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK_ROUNDS;
            let len = CHUNK_ROUNDS.min(rounds - start);
            let (mut recs, zero, one) =
                simulate_chunk(spec, model, seed, stream_base + c, start, len);
            if !keep_records {
                recs.clear();
            }
            (recs, zero, one)
        })
        .collect();
    let mut zero = vec![0u64; n * n];
    let mut one = vec![0u64; n * n];
    let mut records = Vec::with_capacity(if keep_records { rounds as usize } else { 0 });
    for (recs, z, o) in chunks {
        records.extend(recs);
        for i in 0..n * n {
            zero[i] += z[i];
            one[i] += o[i];
        }
    }
    let table = StatTable::from_counts(spec.input_weights(), zero, one)
        .expect("simulated counts are well-formed");
    (records, table, n_chunks)
}

/// Sample `rounds` protocol rounds. Bit-for-bit reproducible from (seed, spec,
/// model, rounds) regardless of the number of worker threads: each 2^16-round
/// chunk draws from its own counter-addressed stream.
pub fn simulate(
    spec: &ProtocolSpec,
    model: &ChannelModel,
    rounds: u64,
    seed: u64,
) -> Result<(Vec<RoundRecord>, StatTable), ChannelError> {
    if rounds == 0 {
        return Err(ChannelError::NoRounds);
    }
    let (records, table, _) = simulate_with_streams(spec, model, rounds, seed, 0, true);
    Ok((records, table))
}

/// Simulate consecutive blocks with the transmission multiplied by each
/// schedule entry's efficiency scale; returns one count table per block.
/// A single block at scale 1.0 reproduces [`simulate`] exactly.
pub fn blinding_scenario(
    spec: &ProtocolSpec,
    model: &ChannelModel,
    schedule: &[(u64, f64)],
    seed: u64,
) -> Result<Vec<StatTable>, ChannelError> {
    if schedule.is_empty() {
        return Err(ChannelError::EmptySchedule);
    }
    let mut out = Vec::with_capacity(schedule.len());
    let mut stream_base = 0u64;
    for &(rounds, scale) in schedule {
        if rounds == 0 {
            return Err(ChannelError::NoRounds);
        }
        let scaled = model.scaled_eta(scale);
        let (_, table, used) =
            simulate_with_streams(spec, &scaled, rounds, seed, stream_base, false);
        stream_base += used;
        out.push(table);
    }
    Ok(out)
}
