//! Command-line experiment harness.
//!
//! Exit codes: 0 success, 2 solver nonconvergence or failed self-checks,
//! 3 configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use seqhom::experiments::{list_experiments, run_experiment, self_check, ExperimentConfig};
use seqhom::SolverError;

#[derive(Parser)]
#[command(name = "seqhom", about = "sequential homotopy solver experiments", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment.
    Run {
        /// Experiment name; see `seqhom list`.
        experiment: String,
        /// JSON configuration file. Flags override file values, which
        /// override defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dotted-path overrides, e.g. `--set driver.rho=0.1`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in experiments.
    List,
    /// Run derivative and invariant self-tests.
    Check,
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                SolverError::Config(_) | SolverError::InvalidParameter(_) => 3u8,
                _ => 2u8,
            };
            ExitCode::from(code)
        }
    }
}

fn dispatch() -> Result<u8, SolverError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { experiment, config, sets, out } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| {
                        SolverError::Config(format!("cannot read {}: {e}", path.display()))
                    })?;
                    ExperimentConfig::from_json(&text)?
                }
                None => ExperimentConfig::default(),
            };
            cfg.experiment = experiment;
            for spec in &sets {
                cfg.apply_override(spec)?;
            }
            let out_dir = out.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
            cfg.out_dir = out_dir.display().to_string();
            let code = run_experiment(&cfg, &out_dir)?;
            println!("{}: exit {code}, artifacts in {}", cfg.experiment, out_dir.display());
            Ok(code as u8)
        }
        Command::List => {
            for (name, description) in list_experiments() {
                println!("{name:18} {description}");
            }
            Ok(0)
        }
        Command::Check => {
            let report = self_check()?;
            let mut ok = true;
            for (name, value, passed) in &report {
                println!("{}: {name} = {value:.3e}", if *passed { "ok  " } else { "FAIL" });
                ok &= passed;
            }
            Ok(if ok { 0 } else { 2 })
        }
    }
}
