//! Command-line front end: dispatch, configuration loading, persistence
//! and the paper-reproduction suite.
//!
//! Exit-code contract: 0 success, 1 validation error (bad flags, config,
//! file problems), 2 numerical failure.

pub mod commands;
pub mod config;
pub mod io;
pub mod manifest;
pub mod pipeline;
pub mod repro;

use config::{SweepRange, ToolkitConfig};
use pipeline::CliError;

const USAGE: &str = "\
dwell - double-well quintic NLS toolkit

usage: dwell <subcommand> [--config FILE] [--out DIR] [options]

subcommands:
  spectrum     linear bound states of the configured potential
  hypotheses   sextic interaction integrals and positivity margins
  branch       symmetric + asymmetric ground-state branches
  bifurcate    symmetry-breaking point and its leading-order prediction
  linearize    second-variation spectra along the asymmetric branch
  fdsim        reduced two-mode dynamics: portraits and equilibria
  nlssim       full NLS relaxation experiment
  sweep        run a subcommand over a parameter range
  repro        paper-reproduction suite with a pass/fail table

options:
  --config FILE          configuration file (defaults to the built-in set)
  --out DIR              output root (default: [output] dir, or $DWELL_OUT)
  --profile quick|full   repro resolution profile (default: full)
  --param NAME=A:STEP:B  sweep range, e.g. separation_len=2:0.5:5
  --run SUB              subcommand executed per sweep cell (default: hypotheses)
  --workers N            parallel sweep cells (default: [output] workers)
";

struct Args {
    subcommand: String,
    config_path: Option<String>,
    out: Option<String>,
    profile: String,
    param: Option<String>,
    run: String,
    workers: Option<usize>,
}

fn parse_args(argv: &[String]) -> Result<Args, CliError> {
    if argv.is_empty() {
        return Err(CliError::Validation(format!("missing subcommand\n{USAGE}")));
    }
    let mut args = Args {
        subcommand: argv[0].clone(),
        config_path: None,
        out: None,
        profile: "full".into(),
        param: None,
        run: "hypotheses".into(),
        workers: None,
    };
    let mut it = argv[1..].iter();
    while let Some(flag) = it.next() {
        let mut take = |name: &str| -> Result<String, CliError> {
            it.next()
                .cloned()
                .ok_or_else(|| CliError::Validation(format!("{name} needs a value")))
        };
        match flag.as_str() {
            "--config" => args.config_path = Some(take("--config")?),
            "--out" => args.out = Some(take("--out")?),
            "--profile" => args.profile = take("--profile")?,
            "--param" => args.param = Some(take("--param")?),
            "--run" => args.run = take("--run")?,
            "--workers" => {
                let w = take("--workers")?;
                args.workers = Some(w.parse().map_err(|_| {
                    CliError::Validation("--workers needs a positive integer".into())
                })?);
            }
            "--help" | "-h" => {
                return Err(CliError::Validation(USAGE.into()));
            }
            other => {
                return Err(CliError::Validation(format!(
                    "unknown flag `{other}`\n{USAGE}"
                )))
            }
        }
    }
    if !matches!(args.profile.as_str(), "quick" | "full") {
        return Err(CliError::Validation(
            "--profile must be `quick` or `full`".into(),
        ));
    }
    Ok(args)
}

fn load_config(path: Option<&str>) -> Result<ToolkitConfig, CliError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| CliError::Validation(format!("cannot read config `{p}`: {e}")))?,
        None => config::DEFAULT_CONFIG.to_string(),
    };
    Ok(ToolkitConfig::parse(&text)?)
}

/// Run the CLI; returns the process exit code.
pub fn run(argv: &[String]) -> i32 {
    match run_inner(argv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn run_inner(argv: &[String]) -> Result<i32, CliError> {
    let args = parse_args(argv)?;
    let mut cfg = load_config(args.config_path.as_deref())?;
    if let Some(w) = args.workers {
        if w == 0 {
            return Err(CliError::Validation("--workers must be at least 1".into()));
        }
        cfg.workers = w;
    }
    let out = commands::default_out(&cfg, &args.subcommand, args.out.as_deref());
    match args.subcommand.as_str() {
        "spectrum" | "hypotheses" | "branch" | "bifurcate" | "linearize" | "fdsim" | "nlssim" => {
            commands::run_subcommand(&args.subcommand, &cfg, &out)?;
            Ok(0)
        }
        "sweep" => {
            let expr = args.param.as_deref().ok_or_else(|| {
                CliError::Validation("sweep needs --param NAME=A:STEP:B".into())
            })?;
            let range = SweepRange::parse(expr)?;
            commands::cmd_sweep(&cfg, &out, &range, &args.run)?;
            Ok(0)
        }
        "repro" => commands::cmd_repro(&cfg, &out, args.profile == "quick"),
        other => Err(CliError::Validation(format!(
            "unknown subcommand `{other}`\n{USAGE}"
        ))),
    }
}
