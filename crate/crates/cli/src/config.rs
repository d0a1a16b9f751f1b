//! Line-oriented run configuration: `section.key = value`, `#` comments,
//! unknown or duplicate keys rejected. Every field is validated before any
//! computation starts, so a malformed config never produces output files.

use std::collections::BTreeSet;
use std::fmt;

use sdiqkd::channel::ChannelModel;
use sdiqkd::moment::HierarchyLevel;
use sdiqkd::optimize::{AnalysisOptions, MuGrid, SweepGrid};
use sdiqkd::protocol::ProtocolSpec;
use sdiqkd::sdp::SolverOptions;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Intensity setting: a fixed value or "optimize".
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuSetting {
    Fixed(f64),
    Optimize,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n: usize,
    pub theta: f64,
    pub mu: MuSetting,
    pub phase_step: Option<f64>,
    pub eta: f64,
    pub p_dc: f64,
    pub sigma: f64,
    pub delta_theta: f64,
    pub delta_xy: f64,
    pub level: HierarchyLevel,
    pub tol: f64,
    pub epsilon: f64,
    pub a1: f64,
    pub a2: f64,
    pub rounds: u64,
    pub seed: u64,
    pub schedule: Vec<(u64, f64)>,
    pub sweep_eta: (f64, f64, f64),
    pub sweep_mu: MuGrid,
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 2,
            theta: 0.6,
            mu: MuSetting::Optimize,
            phase_step: None,
            eta: 1.0,
            p_dc: 0.0,
            sigma: 0.0,
            delta_theta: 0.0,
            delta_xy: 0.0,
            level: HierarchyLevel::S1AB,
            tol: 1e-8,
            epsilon: 0.0,
            a1: 1e-9,
            a2: 1e-9,
            rounds: 1_800_000,
            seed: 0,
            schedule: Vec::new(),
            sweep_eta: (0.5, 1.0, 0.05),
            sweep_mu: MuGrid::default(),
            out_dir: ".".into(),
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse().map_err(|_| ConfigError(format!("{key}: expected a number, got `{v}`")))
}

fn parse_u64(key: &str, v: &str) -> Result<u64, ConfigError> {
    v.parse().map_err(|_| ConfigError(format!("{key}: expected an integer, got `{v}`")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = match line.split_once('=') {
                Some((k, v)) => (k.trim(), v.trim()),
                None => return err(format!("line {}: expected `section.key = value`", lineno + 1)),
            };
            if !seen.insert(key.to_string()) {
                return err(format!("line {}: duplicate key `{key}`", lineno + 1));
            }
            match key {
                "protocol.n" => cfg.n = parse_u64(key, value)? as usize,
                "protocol.theta" => cfg.theta = parse_f64(key, value)?,
                "protocol.mu" => {
                    cfg.mu = if value == "optimize" {
                        MuSetting::Optimize
                    } else {
                        MuSetting::Fixed(parse_f64(key, value)?)
                    }
                }
                "protocol.phase_step" => cfg.phase_step = Some(parse_f64(key, value)?),
                "channel.eta" => cfg.eta = parse_f64(key, value)?,
                "channel.p_dc" => cfg.p_dc = parse_f64(key, value)?,
                "channel.sigma" => cfg.sigma = parse_f64(key, value)?,
                "channel.delta_theta" => cfg.delta_theta = parse_f64(key, value)?,
                "channel.delta_xy" => cfg.delta_xy = parse_f64(key, value)?,
                "analysis.level" => {
                    cfg.level = match value.to_ascii_lowercase().as_str() {
                        "s1" => HierarchyLevel::S1,
                        "s1ab" | "s1+ab" => HierarchyLevel::S1AB,
                        "s2" => HierarchyLevel::S2,
                        other => return err(format!("analysis.level: unknown level `{other}`")),
                    }
                }
                "analysis.tol" => cfg.tol = parse_f64(key, value)?,
                "analysis.epsilon" => cfg.epsilon = parse_f64(key, value)?,
                "analysis.a1" => cfg.a1 = parse_f64(key, value)?,
                "analysis.a2" => cfg.a2 = parse_f64(key, value)?,
                "simulation.rounds" => cfg.rounds = parse_u64(key, value)?,
                "simulation.seed" => cfg.seed = parse_u64(key, value)?,
                "simulation.schedule" => {
                    cfg.schedule = value
                        .split(',')
                        .map(|item| {
                            let (r, s) = item.trim().split_once(':').ok_or_else(|| {
                                ConfigError(format!(
                                    "simulation.schedule: expected `rounds:scale`, got `{item}`"
                                ))
                            })?;
                            Ok((parse_u64("schedule.rounds", r.trim())?,
                                parse_f64("schedule.scale", s.trim())?))
                        })
                        .collect::<Result<Vec<_>, ConfigError>>()?
                }
                "sweep.eta_min" => cfg.sweep_eta.0 = parse_f64(key, value)?,
                "sweep.eta_max" => cfg.sweep_eta.1 = parse_f64(key, value)?,
                "sweep.eta_step" => cfg.sweep_eta.2 = parse_f64(key, value)?,
                "sweep.mu_min" => cfg.sweep_mu.lo = parse_f64(key, value)?,
                "sweep.mu_max" => cfg.sweep_mu.hi = parse_f64(key, value)?,
                "sweep.mu_points" => cfg.sweep_mu.points = parse_u64(key, value)? as usize,
                "sweep.refine_iters" => cfg.sweep_mu.refine_iters = parse_u64(key, value)? as usize,
                "io.out_dir" => cfg.out_dir = value.to_string(),
                other => return err(format!("line {}: unknown key `{other}`", lineno + 1)),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&mut self) -> Result<(), ConfigError> {
        // Constructing the domain objects runs the full invariant checks.
        self.spec_with_mu(match self.mu {
            MuSetting::Fixed(m) => m,
            MuSetting::Optimize => 0.1,
        })?;
        self.channel()?;
        for &(rounds, scale) in &self.schedule {
            if rounds == 0 || scale < 0.0 {
                return err("simulation.schedule: rounds must be positive and scales nonnegative");
            }
        }
        if !(self.tol > 0.0 && self.a1 > 0.0 && self.a1 < 1.0 && self.a2 > 0.0 && self.a2 < 1.0) {
            return err("analysis: tol, a1 and a2 must be in (0, 1)");
        }
        if self.epsilon < 0.0 {
            return err("analysis.epsilon must be nonnegative");
        }
        let (lo, hi, step) = self.sweep_eta;
        if !(lo > 0.0 && hi <= 1.0 && lo <= hi && step > 0.0) {
            return err("sweep: eta range must satisfy 0 < eta_min <= eta_max <= 1, eta_step > 0");
        }
        if !(self.sweep_mu.lo > 0.0 && self.sweep_mu.lo < self.sweep_mu.hi && self.sweep_mu.points >= 2)
        {
            return err("sweep: mu grid must satisfy 0 < mu_min < mu_max with at least 2 points");
        }
        Ok(())
    }

    pub fn spec_with_mu(&self, mu: f64) -> Result<ProtocolSpec, ConfigError> {
        let spec = ProtocolSpec::new(self.n, self.theta, mu)
            .map_err(|e| ConfigError(format!("protocol: {e}")))?;
        match self.phase_step {
            Some(step) => {
                spec.with_phase_step(step).map_err(|e| ConfigError(format!("protocol: {e}")))
            }
            None => Ok(spec),
        }
    }

    pub fn channel(&self) -> Result<ChannelModel, ConfigError> {
        ChannelModel::new(self.eta, self.p_dc, self.sigma)
            .map(|m| m.with_systematics(self.delta_theta, self.delta_xy))
            .and_then(|m| m.validated())
            .map_err(|e| ConfigError(format!("channel: {e}")))
    }

    pub fn analysis(&self) -> AnalysisOptions {
        AnalysisOptions {
            level: self.level.clone(),
            epsilon: self.epsilon,
            solver: SolverOptions { tol: self.tol, ..SolverOptions::default() },
            a1: self.a1,
            a2: self.a2,
        }
    }

    pub fn sweep_grid(&self) -> SweepGrid {
        SweepGrid::from_range(self.sweep_eta.0, self.sweep_eta.1, self.sweep_eta.2, self.sweep_mu)
    }

    /// Fully resolved `section.key = value` listing for provenance.
    pub fn echo(&self) -> String {
        let mu = match self.mu {
            MuSetting::Fixed(m) => m.to_string(),
            MuSetting::Optimize => "optimize".to_string(),
        };
        let level = match self.level {
            HierarchyLevel::S1 => "s1",
            HierarchyLevel::S1AB => "s1ab",
            HierarchyLevel::S2 => "s2",
            HierarchyLevel::Custom(_) => "custom",
        };
        let schedule = self
            .schedule
            .iter()
            .map(|(r, s)| format!("{r}:{s}"))
            .collect::<Vec<_>>()
            .join(",");
        let mut out = String::new();
        out.push_str(&format!("protocol.n = {}\n", self.n));
        out.push_str(&format!("protocol.theta = {}\n", self.theta));
        out.push_str(&format!("protocol.mu = {mu}\n"));
        if let Some(step) = self.phase_step {
            out.push_str(&format!("protocol.phase_step = {step}\n"));
        }
        out.push_str(&format!("channel.eta = {}\n", self.eta));
        out.push_str(&format!("channel.p_dc = {}\n", self.p_dc));
        out.push_str(&format!("channel.sigma = {}\n", self.sigma));
        out.push_str(&format!("channel.delta_theta = {}\n", self.delta_theta));
        out.push_str(&format!("channel.delta_xy = {}\n", self.delta_xy));
        out.push_str(&format!("analysis.level = {level}\n"));
        out.push_str(&format!("analysis.tol = {}\n", self.tol));
        out.push_str(&format!("analysis.epsilon = {}\n", self.epsilon));
        out.push_str(&format!("analysis.a1 = {}\n", self.a1));
        out.push_str(&format!("analysis.a2 = {}\n", self.a2));
        out.push_str(&format!("simulation.rounds = {}\n", self.rounds));
        out.push_str(&format!("simulation.seed = {}\n", self.seed));
        if !schedule.is_empty() {
            out.push_str(&format!("simulation.schedule = {schedule}\n"));
        }
        out.push_str(&format!("sweep.eta_min = {}\n", self.sweep_eta.0));
        out.push_str(&format!("sweep.eta_max = {}\n", self.sweep_eta.1));
        out.push_str(&format!("sweep.eta_step = {}\n", self.sweep_eta.2));
        out.push_str(&format!("sweep.mu_min = {}\n", self.sweep_mu.lo));
        out.push_str(&format!("sweep.mu_max = {}\n", self.sweep_mu.hi));
        out.push_str(&format!("sweep.mu_points = {}\n", self.sweep_mu.points));
        out.push_str(&format!("sweep.refine_iters = {}\n", self.sweep_mu.refine_iters));
        out.push_str(&format!("io.out_dir = {}\n", self.out_dir));
        out
    }
}
