//! `coulomb-lab`: reproducible experiment commands over `coulomb-core`.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for runtime
//! errors. Errors are printed to stderr as one JSON object.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::Parser;

pub use commands::{Command, Run};
pub use config::ExperimentConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "coulomb-lab", version, about = "Signed Coulomb particle and mean-field experiments")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML experiment configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` in the configuration.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for path-level parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Base seed; overrides `seed` in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Resolves the configuration and runs the command. Returns written files.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let mut config = ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| commands::default_out(cli.command));
    let run = Run::new(cli.command, config, out)?;
    log::info!("{} with config hash {}", cli.command.name(), run.hash());
    match cli.jobs {
        Some(0) => Err(CliError::config("--jobs", "must be >= 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            pool.install(|| run.execute())
        }
        None => run.execute(),
    }
}
