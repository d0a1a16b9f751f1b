//! Command-line front end: wires run configurations into the certification
//! pipelines and writes reports, statistics tables and sweep CSVs.
//!
//! Commands: `keyrate`, `simulate`, `certify`, `sweep`, `selftest`, each with
//! `--config PATH` plus optional `--out DIR` and `--seed U64` overrides.
//! All randomness flows from the single config seed; identical config and
//! seed produce byte-identical outputs.

mod commands;
mod config;

use std::process::ExitCode;

use config::RunConfig;

const USAGE: &str = "\
usage: sdiqkd <command> --config PATH [--out DIR] [--seed U64]

commands:
  keyrate    asymptotic certified key rate at the configured parameters
  simulate   Monte Carlo round generation; writes rounds.csv and stats.csv
  certify    finite-size analysis of a counts file: --stats FILE required
  sweep      transmission sweep with optimized intensity; writes sweep.csv
  selftest   per-block analysis over the configured efficiency schedule
";

struct Cli {
    command: String,
    config_path: String,
    out_override: Option<String>,
    seed_override: Option<u64>,
    stats_path: Option<String>,
}

fn parse_args(args: &[String]) -> Result<Cli, String> {
    if args.is_empty() {
        return Err("missing command".into());
    }
    let command = args[0].clone();
    let mut config_path = None;
    let mut out_override = None;
    let mut seed_override = None;
    let mut stats_path = None;
    let mut it = args[1..].iter();
    while let Some(flag) = it.next() {
        let mut grab = || {
            it.next().cloned().ok_or_else(|| format!("flag {flag} expects a value"))
        };
        match flag.as_str() {
            "--config" => config_path = Some(grab()?),
            "--out" => out_override = Some(grab()?),
            "--seed" => {
                let v = grab()?;
                seed_override =
                    Some(v.parse().map_err(|_| format!("--seed expects an integer, got `{v}`"))?);
            }
            "--stats" => stats_path = Some(grab()?),
            other => return Err(format!("unknown flag `{other}`")),
        }
    }
    let config_path = config_path.ok_or("missing --config PATH")?;
    Ok(Cli { command, config_path, out_override, seed_override, stats_path })
}

fn run() -> Result<(), String> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = parse_args(&args).map_err(|e| format!("{e}\n{USAGE}"))?;

    let text = std::fs::read_to_string(&cli.config_path)
        .map_err(|e| format!("cannot read config `{}`: {e}", cli.config_path))?;
    let mut cfg = RunConfig::parse(&text).map_err(|e| format!("config: {e}"))?;
    if let Some(out) = cli.out_override {
        cfg.out_dir = out;
    }
    if let Some(seed) = cli.seed_override {
        cfg.seed = seed;
    }

    match cli.command.as_str() {
        "keyrate" => commands::cmd_keyrate(&cfg),
        "simulate" => commands::cmd_simulate(&cfg),
        "certify" => {
            let stats = cli.stats_path.ok_or("certify requires --stats FILE")?;
            commands::cmd_certify(&cfg, &stats)
        }
        "sweep" => commands::cmd_sweep(&cfg),
        "selftest" => commands::cmd_selftest(&cfg),
        other => Err(format!("unknown command `{other}`\n{USAGE}")),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
