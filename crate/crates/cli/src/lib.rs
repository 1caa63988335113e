//! Library side of the `mploc` command: configuration, subcommands and
//! result persistence.

pub mod commands;
pub mod config;
pub mod record;

use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use anyhow::Result;
use chrono::Utc;
use clap::{Args, Parser, Subcommand};
use mploc_core::model::max_dim_from_env;
use mploc_core::McOptions;

use crate::commands::Context;
use crate::config::ExperimentConfig;
use crate::record::{persist, RunRecord};

#[derive(Debug, Parser)]
#[command(name = "mploc", version, about = "Seeded experiments for multi-particle power-law hopping Hamiltonians")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive and validate the exponent schedule.
    Params(RunArgs),
    /// Classify cubes for one disorder realization.
    Classify(RunArgs),
    /// Eigenvalue concentration ensembles (one or two volumes).
    Stollmann(RunArgs),
    /// Simultaneous singularity of a separable pair.
    Joint(RunArgs),
    /// Empirical probe of the coupling step.
    Coupling(RunArgs),
    /// Eigenfunction decay-exponent table.
    Decay(RunArgs),
    /// Poisson-identity residuals on random eigenpairs.
    Poisson(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output root; defaults to `output_dir` or `out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Params(_) => "params",
            Command::Classify(_) => "classify",
            Command::Stollmann(_) => "stollmann",
            Command::Joint(_) => "joint",
            Command::Coupling(_) => "coupling",
            Command::Decay(_) => "decay",
            Command::Poisson(_) => "poisson",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Params(a)
            | Command::Classify(a)
            | Command::Stollmann(a)
            | Command::Joint(a)
            | Command::Coupling(a)
            | Command::Decay(a)
            | Command::Poisson(a) => a,
        }
    }
}

/// Result of a completed run.
pub struct Finished {
    pub dir: PathBuf,
    pub record: RunRecord,
    pub summary: Vec<String>,
}

/// Loads the config, runs the subcommand and writes its artifacts.
pub fn run(command: &Command, cancel: Option<Arc<AtomicBool>>) -> Result<Finished> {
    let args = command.args();
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| Path::new("out").to_path_buf());
    let opts = McOptions { max_dim: max_dim_from_env(), parallelism: config.parallelism, cancel, ..Default::default() };
    let started = Utc::now();
    let ctx = Context::new(config, opts)?;
    let outcome = match command {
        Command::Params(_) => commands::cmd_params(&ctx),
        Command::Classify(_) => commands::cmd_classify(&ctx),
        Command::Stollmann(_) => commands::cmd_stollmann(&ctx),
        Command::Joint(_) => commands::cmd_joint(&ctx),
        Command::Coupling(_) => commands::cmd_coupling(&ctx),
        Command::Decay(_) => commands::cmd_decay(&ctx),
        Command::Poisson(_) => commands::cmd_poisson(&ctx),
    }?;
    let (dir, record) = persist(&out, command.name(), &ctx.config, started, &outcome)?;
    Ok(Finished { dir, record, summary: outcome.summary })
}
