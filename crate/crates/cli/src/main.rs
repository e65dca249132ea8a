//! `dendrite-taper` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure or a
//! failed built-in check.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dendrite_taper::optimize::Criterion;

use commands::{Context, Outcome};
use config::{Overrides, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] dendrite_taper::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_config() => 2,
            CliError::Core(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "dendrite-taper", version, about = "Cable-model attenuation of tapered dendrites")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Number of eigenmodes kept.
    #[arg(long, global = true, value_name = "N")]
    modes: Option<usize>,
    /// Cells for both the x and y grids.
    #[arg(long, global = true, value_name = "N")]
    cells: Option<usize>,
    /// Base seed for random starts.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Config override, repeatable; VALUE is parsed as JSON, else as a string.
    #[arg(long = "set", global = true, value_name = "K=V")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectrum of the taper profile and sign-bound checks.
    Eigen {
        #[arg(long, value_name = "PATH")]
        profile: Option<PathBuf>,
    },
    /// Time-domain and reduced transfer ratios with a state dump.
    Transfer {
        #[arg(long, value_name = "PATH")]
        profile: Option<PathBuf>,
    },
    /// Modal response to a somatic current pulse.
    Transient {
        #[arg(long, value_name = "PATH")]
        profile: Option<PathBuf>,
    },
    /// Two-level transition sweep.
    SweepXi,
    /// Constrained minimization of `mu1` or `T`.
    Optimize {
        /// `mu1` or `T`; defaults to the config value.
        #[arg(long)]
        criterion: Option<Criterion>,
        #[arg(long, value_name = "N")]
        restarts: Option<usize>,
    },
    /// Every command plus the cylinder pullback check.
    CheckAll,
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let overrides = Overrides {
        cells: cli.cells,
        modes: cli.modes,
        seed: cli.seed,
        set: cli.set,
    };
    let mut cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    match &cli.command {
        Command::Eigen { profile } | Command::Transfer { profile } | Command::Transient { profile } => {
            if profile.is_some() {
                cfg.profile.clone_from(profile);
            }
        }
        Command::Optimize { restarts: Some(n), .. } => cfg.restarts = *n,
        _ => {}
    }
    cfg.validate()?;
    let ctx = Context {
        cfg,
        out: commands::output_dir(cli.out.as_deref()),
    };
    match cli.command {
        Command::Eigen { .. } => commands::eigen(&ctx),
        Command::Transfer { .. } => commands::transfer(&ctx),
        Command::Transient { .. } => commands::transient(&ctx),
        Command::SweepXi => commands::sweep_xi(&ctx),
        Command::Optimize { criterion, .. } => {
            let c = criterion.unwrap_or(ctx.cfg.criterion);
            commands::optimize(&ctx, c)
        }
        Command::CheckAll => commands::check_all(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome { passed: true }) => ExitCode::SUCCESS,
        Ok(Outcome { passed: false }) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
