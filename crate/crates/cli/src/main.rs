//! `manyscat` command-line driver.
//!
//! Exit codes: 0 success, 2 invalid input or refused regime, 3 solver
//! failure, 4 I/O failure. Failures print a JSON record to stderr and, when
//! the output directory is known, to `error.json`.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use commands::Command;
use config::{Overrides, RunConfig};
use manyscat_core::{Error, Result};
use output::{error_record, exit_code, RunDir};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "manyscat", version, about = "Scattering by many small impedance particles")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Place an ensemble and solve the many-body system.
    Simulate(Overrides),
    /// Solve the limiting volume integral equation.
    Homogenize(Overrides),
    /// Turn a target refractive index into (h, N) and check it by round trip.
    Design(Overrides),
    /// Compare many-body fields with the limit over a radius sweep.
    Converge(Overrides),
    /// Check the monopole formula against the exact single-sphere series.
    Validate(Overrides),
}

fn main() {
    let cli = Cli::parse();
    let (cmd, ov) = match cli.command {
        Sub::Simulate(o) => (Command::Simulate, o),
        Sub::Homogenize(o) => (Command::Homogenize, o),
        Sub::Design(o) => (Command::Design, o),
        Sub::Converge(o) => (Command::Converge, o),
        Sub::Validate(o) => (Command::Validate, o),
    };
    let env = |k: &str| std::env::var(k).ok();
    let mut out_dir: Option<PathBuf> = ov
        .output_dir
        .clone()
        .or_else(|| env(config::ENV_OUTPUT_DIR).map(PathBuf::from));
    let result = execute(cmd, &ov, &env, &mut out_dir);
    match result {
        Ok(dir) => {
            eprintln!("{}: results in {}", cmd.name(), dir.display());
        }
        Err(e) => {
            let record = error_record(cmd.name(), &e);
            eprintln!("{record}");
            if let Some(dir) = out_dir {
                if let Ok(run) = RunDir::create(&dir) {
                    let _ = run.write_json("error.json", &record);
                }
            }
            std::process::exit(exit_code(&e));
        }
    }
}

fn execute(
    cmd: Command,
    ov: &Overrides,
    env: &dyn Fn(&str) -> Option<String>,
    out_dir: &mut Option<PathBuf>,
) -> Result<PathBuf> {
    let raw = RunConfig::assemble(ov, env)?;
    if raw.output_dir.is_some() {
        out_dir.clone_from(&raw.output_dir);
    }
    let cfg = commands::resolve(raw, cmd)?;
    out_dir.clone_from(&cfg.output_dir);
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
    }
    let run = RunDir::create(cfg.output_dir.as_ref().unwrap())?;
    let echo = serde_json::to_value(&cfg).map_err(|e| Error::Io(e.into()))?;
    run.write_json("config.json", &echo)?;
    let mut summary = commands::run(&cfg, cmd, &run)?;
    summary["status"] = "ok".into();
    summary["command"] = cmd.name().into();
    summary["seed"] = cfg.seed.into();
    summary["deterministic"] = cfg.deterministic.into();
    run.write_json("summary.json", &summary)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.into()))?
    );
    Ok(run.path().to_path_buf())
}
