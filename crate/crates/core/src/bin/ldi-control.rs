use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ldi_control::dataset::DatasetManifest;
use ldi_control::experiments::{self, check_datasets, check_run_dir, ExperimentConfig, Law, RunMetrics};
use ldi_control::linalg::Vector;
use ldi_control::lmi::export_sdpa;
use ldi_control::{Error, Result};

#[derive(Parser)]
#[command(name = "ldi-control", version, about = "Data-driven receding-horizon control of polytopic LDIs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config; benchmark defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Offline-data seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Strict and decrease margin of the LMIs.
    #[arg(long)]
    margin: Option<f64>,
    /// Solver feasibility and gap tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Robust synthesis from vertex datasets; prints K, P and gamma.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Dataset manifest; offline data are generated from the config when omitted.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Minimize the cost bound at this state ("x1,x2") instead of only certifying stability.
        #[arg(long, value_delimiter = ',')]
        x0: Option<Vec<f64>>,
    },
    /// Paired adaptive and robust runs of the configured experiment.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Constant-parameter sweep with random initial states.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        parallel: usize,
    },
    /// Writes the SDP solved at step k of the nominal run in SDPA format.
    ExportSdpa {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        step: usize,
        #[arg(long, value_enum, default_value_t = LawArg::Adaptive)]
        law: LawArg,
    },
    /// Invariant checks on a simulate output directory or on datasets.
    Check {
        #[command(flatten)]
        common: Common,
        /// Directory written by `simulate` (defaults to --out).
        #[arg(long)]
        dir: Option<PathBuf>,
        /// Check only the datasets listed in this manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LawArg {
    Adaptive,
    Robust,
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.offline.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    if let Some(m) = c.margin {
        cfg.set_margin(m);
    }
    if let Some(t) = c.tol {
        cfg.set_tolerance(t);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn manifest_base(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(v)?;
    match writeln!(std::io::stdout(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Synth { common, manifest, x0 } => {
            let cfg = load_config(&common)?;
            let datasets = match &manifest {
                Some(p) => DatasetManifest::read(p)?.load(manifest_base(p))?,
                None => experiments::generate_offline(&cfg)?.datasets,
            };
            let x0 = x0.map(Vector::from_vec);
            print_json(&experiments::synthesize(&cfg, &datasets, x0.as_ref())?)?;
        }
        Command::Simulate { common } => {
            let cfg = load_config(&common)?;
            let offline = experiments::generate_offline(&cfg)?;
            let record = experiments::run_pair(&cfg, &offline, &cfg.schedule()?, &cfg.run_x0())?;
            experiments::write_offline(&offline, &cfg.output_dir)?;
            let metrics: RunMetrics = experiments::write_run(&cfg, &record, &cfg.output_dir)?;
            print_json(&metrics)?;
        }
        Command::Sweep { common, parallel } => {
            let cfg = load_config(&common)?;
            let result = experiments::run_sweep(&cfg, parallel)?;
            experiments::write_sweep(&result, &cfg.output_dir)?;
            print_json(&json!({
                "offline_attempts": result.offline_attempts,
                "cells": result.cells.len(),
                "failed": result.cells.iter().filter(|c| c.error.is_some()).count(),
                "summary": result.summary,
            }))?;
        }
        Command::ExportSdpa { common, step, law } => {
            let cfg = load_config(&common)?;
            let law = match law {
                LawArg::Adaptive => Law::Adaptive,
                LawArg::Robust => Law::Robust,
            };
            let problem = experiments::step_problem(&cfg, step, law)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let path = cfg.output_dir.join(format!("step_{step}.dat-s"));
            std::fs::write(&path, export_sdpa(&problem))?;
            print_json(&json!({
                "path": path,
                "variables": problem.num_variables(),
                "blocks": problem.block_dims().len(),
                "block_dims": problem.block_dims(),
                "equalities": problem.equalities.len(),
            }))?;
        }
        Command::Check { common, dir, manifest } => {
            let cfg = load_config(&common)?;
            let report = match &manifest {
                Some(p) => {
                    let ds = DatasetManifest::read(p)?.load(manifest_base(p))?;
                    experiments::CheckReport { items: check_datasets(&ds) }
                }
                None => check_run_dir(&cfg, dir.as_deref().unwrap_or(&cfg.output_dir))?,
            };
            print_json(&json!({ "passed": report.passed(), "items": report.items }))?;
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            eprintln!("{}", json!({ "error": "usage", "message": msg.trim_end() }));
            return ExitCode::from(64);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            let err: Error = e;
            eprintln!("{}", json!({ "error": err.kind(), "message": err.to_string() }));
            ExitCode::FAILURE
        }
    }
}
