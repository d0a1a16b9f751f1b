//! Intensity optimization and transmission sweeps against the certified rate.
//!
//! Every evaluation is an SDP solve, so the optimizer is a coarse grid with
//! golden-section refinement around the best bracket rather than anything
//! derivative-based. Grid points are independent and evaluate in parallel
//! with a deterministic, index-ordered aggregation.

use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{averaged_mean_photons, click_probability, ChannelError, ChannelModel};
use crate::moment::{build_problem, solve_guessing, HierarchyLevel, MomentError};
use crate::protocol::{sift, GramConstraint, ProtocolError, ProtocolSpec};
use crate::sdp::SolverOptions;
use crate::security::{finite_size_report, KeyRateReport, RunParams, SecurityError};
use crate::stats::StatTable;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    Security(#[from] SecurityError),
}

/// How the relaxation is built and solved.
#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub level: HierarchyLevel,
    /// Half-width of the overlap box; 0 means the exact overlap assumption.
    pub epsilon: f64,
    pub solver: SolverOptions,
    pub a1: f64,
    pub a2: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            level: HierarchyLevel::S1AB,
            epsilon: 0.0,
            solver: SolverOptions::default(),
            a1: 1e-9,
            a2: 1e-9,
        }
    }
}

impl AnalysisOptions {
    pub fn gram(&self, spec: &ProtocolSpec) -> Result<GramConstraint, ProtocolError> {
        if self.epsilon > 0.0 {
            GramConstraint::ideal_boxed(spec, self.epsilon)
        } else {
            Ok(GramConstraint::ideal(spec))
        }
    }
}

/// Asymptotic statistics of the noise model: averaged detected intensity
/// composed with the dark-count click probability, per cell.
pub fn noise_model_statistics(spec: &ProtocolSpec, model: &ChannelModel) -> StatTable {
    let n = spec.n();
    let p0: Vec<f64> = (0..n * n)
        .map(|i| {
            let (x, y) = (i / n, i % n);
            click_probability(averaged_mean_photons(spec, model, x, y), model)
        })
        .collect();
    StatTable::from_probs(spec.input_weights(), p0).expect("click probabilities are in [0,1]")
}

fn params_for(spec: &ProtocolSpec, model: &ChannelModel, analysis: &AnalysisOptions) -> RunParams {
    RunParams {
        n: spec.n(),
        theta: spec.theta(),
        mu: spec.mu(),
        phase_step: spec.phase_step(),
        eta: model.eta,
        p_dc: model.p_dc,
        sigma: model.sigma,
        delta_theta: model.delta_theta,
        delta_xy: model.delta_xy,
        epsilon: analysis.epsilon,
        tol: analysis.solver.tol,
        a1: analysis.a1,
        a2: analysis.a2,
        rounds: 0,
        seed: None,
    }
}

/// Asymptotic pipeline at fixed parameters: noise-model statistics, one SDP
/// solve, one report.
pub fn keyrate_at(
    spec: &ProtocolSpec,
    model: &ChannelModel,
    analysis: &AnalysisOptions,
) -> Result<KeyRateReport, OptimizeError> {
    let stats = noise_model_statistics(spec, model);
    sift(spec, &stats)?; // reject degenerate statistics up front
    let gram = analysis.gram(spec)?;
    let problem = build_problem(spec, &gram, &stats, &analysis.level)?;
    let pg = solve_guessing(&problem, &analysis.solver)?;
    Ok(finite_size_report(&pg, &stats, analysis.a1, analysis.a2, params_for(spec, model, analysis))?)
}

/// The certified asymptotic rate, with degenerate statistics scored as zero.
fn rate_or_zero(
    spec: &ProtocolSpec,
    model: &ChannelModel,
    analysis: &AnalysisOptions,
) -> Result<f64, OptimizeError> {
    match keyrate_at(spec, model, analysis) {
        Ok(report) => Ok(report.rate_asymptotic.rate),
        Err(OptimizeError::Protocol(ProtocolError::DegenerateProtocol))
        | Err(OptimizeError::Moment(MomentError::DegenerateStatistics)) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Intensity search grid: coarse scan, then golden-section refinement on the
/// bracket around the best grid point.
#[derive(Debug, Clone, Copy)]
pub struct MuGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub refine_iters: usize,
}

impl Default for MuGrid {
    fn default() -> Self {
        Self { lo: 0.01, hi: 3.0, points: 12, refine_iters: 18 }
    }
}

/// Transmission sweep specification.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub etas: Vec<f64>,
    pub mu: MuGrid,
}

impl SweepGrid {
    pub fn from_range(eta_lo: f64, eta_hi: f64, eta_step: f64, mu: MuGrid) -> Self {
        let mut etas = Vec::new();
        let mut eta = eta_lo;
        while eta <= eta_hi + 1e-12 {
            etas.push(eta.min(1.0));
            eta += eta_step;
        }
        Self { etas, mu }
    }
}

/// One optimized point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub eta: f64,
    /// Optimal intensity; absent when no intensity yields a positive rate.
    pub mu_opt: Option<f64>,
    pub rate: f64,
}

impl SweepPoint {
    pub fn csv_header() -> &'static str {
        "eta,mu,R,level,status"
    }

    pub fn to_csv_row(&self, level: &str) -> String {
        let (mu, status) = match self.mu_opt {
            Some(m) => (m.to_string(), "positive"),
            None => ("".to_string(), "no-key"),
        };
        format!("{},{},{},{},{}", self.eta, mu, self.rate, level, status)
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Maximize the certified rate over the intensity at one transmission.
pub fn optimize_mu_at(
    spec_template: &ProtocolSpec,
    model: &ChannelModel,
    grid: &MuGrid,
    analysis: &AnalysisOptions,
) -> Result<SweepPoint, OptimizeError> {
    let eval = |mu: f64| -> Result<f64, OptimizeError> {
        rate_or_zero(&spec_template.clone().with_mu(mu)?, model, analysis)
    };
    let mus: Vec<f64> = (0..grid.points)
        .map(|i| grid.lo + (grid.hi - grid.lo) * i as f64 / (grid.points - 1).max(1) as f64)
        .collect();
    let rates: Vec<f64> = mus
        .par_iter()
        .map(|&mu| eval(mu))
        .collect::<Result<Vec<_>, _>>()?;
    let best = rates
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    if rates[best] <= 0.0 {
        return Ok(SweepPoint { eta: model.eta, mu_opt: None, rate: 0.0 });
    }

    // Golden-section refinement on the bracket around the best grid point.
    let mut a = if best > 0 { mus[best - 1] } else { mus[best] };
    let mut b = if best + 1 < mus.len() { mus[best + 1] } else { mus[best] };
    let mut best_mu = mus[best];
    let mut best_rate = rates[best];
    if b > a {
        let mut x1 = b - GOLDEN * (b - a);
        let mut x2 = a + GOLDEN * (b - a);
        let mut f1 = eval(x1)?;
        let mut f2 = eval(x2)?;
        for _ in 0..grid.refine_iters {
            if f1 >= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - GOLDEN * (b - a);
                f1 = eval(x1)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + GOLDEN * (b - a);
                f2 = eval(x2)?;
            }
            let (x, f) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
            if f > best_rate {
                best_rate = f;
                best_mu = x;
            }
        }
    }
    Ok(SweepPoint { eta: model.eta, mu_opt: Some(best_mu), rate: best_rate })
}

/// Optimize the intensity at every transmission of the grid.
pub fn optimize_mu(
    spec_template: &ProtocolSpec,
    model_template: &ChannelModel,
    grid: &SweepGrid,
    analysis: &AnalysisOptions,
) -> Result<Vec<SweepPoint>, OptimizeError> {
    grid.etas
        .iter()
        .map(|&eta| {
            let model = ChannelModel { eta, ..*model_template }.validated()?;
            optimize_mu_at(spec_template, &model, &grid.mu, analysis)
        })
        .collect()
}

/// Smallest transmission with a certified rate above `r_floor`, located by
/// bisection with the intensity optimized at every probe. Returns None when
/// even the upper end yields no key.
pub fn threshold_eta(
    spec_template: &ProtocolSpec,
    model_template: &ChannelModel,
    mu_grid: &MuGrid,
    analysis: &AnalysisOptions,
    eta_range: (f64, f64),
    r_floor: f64,
    eta_tol: f64,
) -> Result<Option<f64>, OptimizeError> {
    let rate_at = |eta: f64| -> Result<f64, OptimizeError> {
        let model = ChannelModel { eta, ..*model_template }.validated()?;
        Ok(optimize_mu_at(spec_template, &model, mu_grid, analysis)?.rate)
    };
    let (mut lo, mut hi) = eta_range;
    if rate_at(hi)? <= r_floor {
        return Ok(None);
    }
    if rate_at(lo)? > r_floor {
        return Ok(Some(lo));
    }
    while hi - lo > eta_tol {
        let mid = 0.5 * (lo + hi);
        if rate_at(mid)? > r_floor {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}
