//! Command-line front end for the optimization laboratory: configuration
//! parsing, scenario dispatch, CSV/SVG/manifest emission, and direct access
//! to the closed-form calculators.
//!
//! Exit code contract: `0` success, `2` configuration error (bad flags,
//! unreadable or invalid config, parameter violations), `3` runtime failure
//! (execution or output errors after a valid configuration). Expected
//! divergence inside a scenario is data, not failure.
//!
//! The command layer is single-threaded; parallelism lives behind the
//! harness worker pool selected with `--workers` (or `SAMLAB_WORKERS`).

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod output;

/// Exit code for configuration problems.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for runtime failures.
pub const EXIT_RUNTIME: i32 = 3;

/// An error carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

pub(crate) fn config_error(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

pub(crate) fn runtime_error(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_RUNTIME,
        message: message.into(),
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Path to the JSON configuration document.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing (required by predict/simulate;
    /// check prints to standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the configuration's base seed (simulate only).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for the simulation pool; 0 uses the runtime default.
    /// Falls back to the SAMLAB_WORKERS environment variable, then to 0.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Emit machine-readable JSON on standard output.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate closed-form bias/variance/error curves for a spectrum.
    Predict(CommonArgs),
    /// Run a seeded experiment scenario (or toy curves / region sweep).
    Simulate(CommonArgs),
    /// Report dominance-condition feasibility and iteration bounds.
    Check(CommonArgs),
}

/// `samlab` — closed-form predictions, seeded simulations, and condition
/// checks for SAM-versus-GD optimization experiments.
#[derive(Debug, Parser)]
#[command(name = "samlab", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Resolve the worker count: `--workers` flag, then `SAMLAB_WORKERS`, then 0
/// (the ambient thread pool).
pub fn effective_workers(args: &CommonArgs) -> Result<usize, CliError> {
    if let Some(w) = args.workers {
        return Ok(w);
    }
    match std::env::var("SAMLAB_WORKERS") {
        Ok(s) => s.trim().parse().map_err(|_| {
            config_error(format!(
                "SAMLAB_WORKERS must be a nonnegative integer, got {s:?}"
            ))
        }),
        Err(_) => Ok(0),
    }
}

/// Dispatch a parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Predict(args) => commands::cmd_predict(args),
        Command::Simulate(args) => commands::cmd_simulate(args),
        Command::Check(args) => commands::cmd_check(args),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worker_resolution_prefers_flag() {
        let args = CommonArgs {
            config: PathBuf::from("x.json"),
            out: None,
            seed: None,
            workers: Some(3),
            json: false,
        };
        assert_eq!(effective_workers(&args).unwrap(), 3);
    }

    #[test]
    fn cli_parses_subcommands_and_flags() {
        let cli = Cli::try_parse_from([
            "samlab", "simulate", "--config", "c.json", "--out", "d", "--seed", "9", "--workers",
            "4", "--json",
        ])
        .unwrap();
        match cli.command {
            Command::Simulate(a) => {
                assert_eq!(a.seed, Some(9));
                assert_eq!(a.workers, Some(4));
                assert!(a.json);
                assert_eq!(a.out.as_deref(), Some(std::path::Path::new("d")));
            }
            _ => panic!("wrong subcommand"),
        }
        assert!(Cli::try_parse_from(["samlab", "predict"]).is_err());
        assert!(Cli::try_parse_from(["samlab", "frobnicate", "--config", "c"]).is_err());
    }
}
