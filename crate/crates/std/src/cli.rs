//! Argument parsing and dispatch.
//!
//! Exit status: 0 success, 2 configuration error, 3 I/O or file-format error,
//! 4 every fit on the grid failed, 5 fewer than 90% of study replications
//! succeeded.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, Globals};
use crate::config::RunConfig;
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "care", version, about = "Kernel relative-risk estimation with external risk models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub globals: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Prefix of every output file.
    #[arg(long, global = true, value_name = "PREFIX", default_value = "care")]
    pub out: PathBuf,

    /// Only machine output: written paths on stdout, errors on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,

    /// Worker threads for `study`.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub workers: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Draw a dataset from the simulation model; writes data and truth CSVs.
    Simulate {
        /// Sample size; overrides `n` in the config.
        #[arg(long)]
        n: Option<u64>,
    },
    /// Fit the kernel estimator at a fixed gamma.
    Fit,
    /// Select gamma on a validation sample.
    Cv,
    /// Select gamma and the external weights theta.
    Care,
    /// Breslow curve, concordance and optional L2 error of a stored model.
    Evaluate,
    /// Replicated simulation study.
    Study,
}

pub fn load_config(args: &GlobalArgs) -> Result<RunConfig> {
    let cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a parsed command line and returns the written files.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let mut cfg = load_config(&cli.globals)?;
    let g = Globals {
        out: cli.globals.out.clone(),
        seed: cli.globals.seed,
        workers: usize::from(cli.globals.workers),
        quiet: cli.globals.quiet,
    };
    match cli.command {
        Command::Simulate { n } => {
            if let Some(n) = n {
                cfg.n = Some(i64::try_from(n).map_err(|_| crate::CliError::config("n: too large"))?);
            }
            commands::simulate(&cfg, &g)
        }
        Command::Fit => commands::fit(&cfg, &g),
        Command::Cv => commands::cv(&cfg, &g),
        Command::Care => commands::care(&cfg, &g),
        Command::Evaluate => commands::evaluate(&cfg, &g),
        Command::Study => commands::study(&cfg, &g),
    }
}
