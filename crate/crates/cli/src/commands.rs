//! The five pipelines behind the subcommands. Every command validates its
//! inputs fully before creating any file, resolves `mu = optimize` against
//! the asymptotic rate, and embeds the resolved configuration in its report
//! for provenance.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use sdiqkd::channel::{blinding_scenario, simulate};
use sdiqkd::moment::{build_problem, solve_guessing};
use sdiqkd::optimize::{keyrate_at, optimize_mu, optimize_mu_at, SweepPoint};
use sdiqkd::security::{finite_size_report, KeyRateReport, RunParams};
use sdiqkd::stats::StatTable;

use crate::config::{MuSetting, RunConfig};

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    Path::new(&cfg.out_dir).join(name)
}

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| format!("cannot create `{}`: {e}", dir.display()))?;
    }
    fs::write(path, contents).map_err(|e| format!("cannot write `{}`: {e}", path.display()))
}

/// Resolve the intensity: fixed value, or the asymptotic optimum at the
/// configured channel.
fn resolve_mu(cfg: &RunConfig) -> Result<f64, String> {
    match cfg.mu {
        MuSetting::Fixed(mu) => Ok(mu),
        MuSetting::Optimize => {
            let spec = cfg.spec_with_mu(0.1).map_err(|e| e.to_string())?;
            let model = cfg.channel().map_err(|e| e.to_string())?;
            let point = optimize_mu_at(&spec, &model, &cfg.sweep_mu, &cfg.analysis())
                .map_err(|e| format!("intensity optimization failed: {e}"))?;
            point
                .mu_opt
                .ok_or_else(|| "no intensity yields a positive rate at this channel".to_string())
        }
    }
}

/// A copy of the config with the intensity pinned to its resolved value, so
/// reports and follow-up commands see a number instead of "optimize".
fn resolved_config(cfg: &RunConfig, mu: f64) -> RunConfig {
    RunConfig { mu: MuSetting::Fixed(mu), ..cfg.clone() }
}

fn report_bundle(cfg: &RunConfig, report: &KeyRateReport) -> String {
    let mut text = String::new();
    text.push_str(&report.to_text());
    text.push_str("\nresolved config:\n");
    text.push_str(&cfg.echo());
    text
}

fn write_report(cfg: &RunConfig, report: &KeyRateReport) -> Result<(), String> {
    write_file(&out_path(cfg, "report.txt"), &report_bundle(cfg, report))?;
    let csv = format!("{}\n{}\n", KeyRateReport::csv_header(), report.to_csv_row());
    write_file(&out_path(cfg, "summary.csv"), &csv)
}

/// Asymptotic pipeline at the configured parameters.
pub fn cmd_keyrate(cfg: &RunConfig) -> Result<(), String> {
    let mu = resolve_mu(cfg)?;
    let cfg = resolved_config(cfg, mu);
    let spec = cfg.spec_with_mu(mu).map_err(|e| e.to_string())?;
    let model = cfg.channel().map_err(|e| e.to_string())?;
    let report =
        keyrate_at(&spec, &model, &cfg.analysis()).map_err(|e| format!("keyrate failed: {e}"))?;
    write_report(&cfg, &report)
}

/// Monte Carlo round generation; writes the round records and the counts.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<(), String> {
    let mu = resolve_mu(cfg)?;
    let cfg = &resolved_config(cfg, mu);
    let spec = cfg.spec_with_mu(mu).map_err(|e| e.to_string())?;
    let model = cfg.channel().map_err(|e| e.to_string())?;
    let (records, table) =
        simulate(&spec, &model, cfg.rounds, cfg.seed).map_err(|e| format!("simulate: {e}"))?;

    let mut rounds_csv = String::with_capacity(records.len() * 16 + 32);
    rounds_csv.push_str("round,r0,r1,k,y,b\n");
    for r in &records {
        rounds_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.round, r.r.0, r.r.1, r.k, r.y, r.b
        ));
    }
    write_file(&out_path(cfg, "rounds.csv"), &rounds_csv)?;

    let mut stats_csv = Vec::new();
    table.write_csv(&mut stats_csv).map_err(|e| e.to_string())?;
    write_file(&out_path(cfg, "stats.csv"), &String::from_utf8(stats_csv).unwrap())?;
    // The resolved configuration (intensity pinned) makes the run
    // re-analyzable: `certify --config resolved.cfg --stats stats.csv`.
    write_file(&out_path(cfg, "resolved.cfg"), &cfg.echo())
}

fn params_from(cfg: &RunConfig, mu: f64, rounds: u64) -> RunParams {
    RunParams {
        n: cfg.n,
        theta: cfg.theta,
        mu,
        phase_step: cfg
            .phase_step
            .unwrap_or(2.0 * std::f64::consts::PI / cfg.n as f64),
        eta: cfg.eta,
        p_dc: cfg.p_dc,
        sigma: cfg.sigma,
        delta_theta: cfg.delta_theta,
        delta_xy: cfg.delta_xy,
        epsilon: cfg.epsilon,
        tol: cfg.tol,
        a1: cfg.a1,
        a2: cfg.a2,
        rounds,
        seed: Some(cfg.seed),
    }
}

fn certify_table(cfg: &RunConfig, mu: f64, table: &StatTable) -> Result<KeyRateReport, String> {
    let spec = cfg.spec_with_mu(mu).map_err(|e| e.to_string())?;
    let analysis = cfg.analysis();
    let gram = analysis.gram(&spec).map_err(|e| e.to_string())?;
    let problem = build_problem(&spec, &gram, table, &analysis.level)
        .map_err(|e| format!("relaxation: {e}"))?;
    let pg = solve_guessing(&problem, &analysis.solver).map_err(|e| format!("solver: {e}"))?;
    finite_size_report(&pg, table, analysis.a1, analysis.a2, params_from(cfg, mu, table.rounds()))
        .map_err(|e| format!("finite-size analysis: {e}"))
}

/// Finite-size pipeline over an observed statistics file.
pub fn cmd_certify(cfg: &RunConfig, stats_file: &str) -> Result<(), String> {
    let mu = match cfg.mu {
        MuSetting::Fixed(mu) => mu,
        MuSetting::Optimize => {
            return Err(
                "certify needs the intensity the data was taken at: set protocol.mu to a number"
                    .into(),
            )
        }
    };
    let spec = cfg.spec_with_mu(mu).map_err(|e| e.to_string())?;
    let file = fs::File::open(stats_file)
        .map_err(|e| format!("cannot read stats file `{stats_file}`: {e}"))?;
    let table = StatTable::read_csv(BufReader::new(file), spec.input_weights())
        .map_err(|e| format!("stats file: {e}"))?;
    let report = certify_table(cfg, mu, &table)?;
    write_report(cfg, &report)
}

/// Transmission sweep with the intensity optimized at every point; also
/// writes the smallest transmission of the grid with a certified positive
/// rate.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<(), String> {
    let spec = cfg.spec_with_mu(0.1).map_err(|e| e.to_string())?;
    let model = cfg.channel().map_err(|e| e.to_string())?;
    let grid = cfg.sweep_grid();
    let analysis = cfg.analysis();
    let points =
        optimize_mu(&spec, &model, &grid, &analysis).map_err(|e| format!("sweep: {e}"))?;

    let level = analysis.level.label();
    let mut csv = String::new();
    csv.push_str(SweepPoint::csv_header());
    csv.push('\n');
    for p in &points {
        csv.push_str(&p.to_csv_row(&level));
        csv.push('\n');
    }
    write_file(&out_path(cfg, "sweep.csv"), &csv)?;

    let threshold = points.iter().find(|p| p.rate > 1e-6).map(|p| p.eta);
    let mut th = String::from("eta_threshold,level\n");
    th.push_str(&match threshold {
        Some(eta) => format!("{eta},{level}\n"),
        None => format!(",{level}\n"),
    });
    write_file(&out_path(cfg, "threshold.csv"), &th)
}

/// Per-block certification over the configured efficiency schedule.
pub fn cmd_selftest(cfg: &RunConfig) -> Result<(), String> {
    if cfg.schedule.is_empty() {
        return Err("selftest requires simulation.schedule".into());
    }
    let mu = resolve_mu(cfg)?;
    let cfg = &resolved_config(cfg, mu);
    let spec = cfg.spec_with_mu(mu).map_err(|e| e.to_string())?;
    let model = cfg.channel().map_err(|e| e.to_string())?;
    let blocks = blinding_scenario(&spec, &model, &cfg.schedule, cfg.seed)
        .map_err(|e| format!("selftest: {e}"))?;

    let mut csv =
        String::from("block,rounds,eta_scale,p_succ,qber,pg_cond_finite,r_finite,verified\n");
    for (i, table) in blocks.iter().enumerate() {
        let report = certify_table(cfg, mu, table)?;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            i,
            cfg.schedule[i].0,
            cfg.schedule[i].1,
            report.p_succ,
            report.qber,
            report.pg_conditional_finite,
            report.rate_finite.rate,
            report.certificate.verified
        ));
    }
    write_file(&out_path(cfg, "selftest.csv"), &csv)
}
