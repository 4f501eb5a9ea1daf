//! Command-line front end: reads an experiment file, runs the requested
//! pipeline and writes CSV results plus a `manifest.json`.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::Runner;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "corrcache",
    version,
    about = "Cache replacement experiments under correlated requests"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `outputs.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for independent runs.
    #[arg(long, global = true, env = "CORRCACHE_WORKERS")]
    pub workers: Option<usize>,
    /// Comma-separated seeds replacing `experiment.seeds`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub seed_override: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check the experiment file and print stationary quantities.
    Validate,
    /// Fault (and cost) estimates per policy, cache size and seed.
    Simulate,
    /// Policy-to-optimal fault ratio against cache size.
    Curve,
    /// Per-cycle request probabilities of the probed documents.
    Lemma1,
    /// Static placements: top-x, cost-weighted and size-aware.
    Placement,
    /// Write the generated request stream of every seed.
    ExportTrace,
}

pub fn run(cli: Cli, stdout: &mut impl std::io::Write) -> Result<(), CliError> {
    let Some(path) = &cli.config else {
        return Err(CliError::Parse("--config <path> is required".into()));
    };
    let mut experiment = config::load(path)?;
    if let Some(seeds) = cli.seed_override {
        experiment = experiment.with_seeds(seeds)?;
    }
    let workers = match cli.workers {
        Some(0) => return Err(CliError::Invalid("--workers: must be at least 1".into())),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let out = cli
        .out
        .unwrap_or_else(|| experiment.config.outputs.dir.clone());
    let runner = Runner::new(experiment, out, workers)?;
    match cli.command {
        Command::Validate => runner.validate(stdout),
        Command::Simulate => runner.simulate(),
        Command::Curve => runner.curve(),
        Command::Lemma1 => runner.lemma1(),
        Command::Placement => runner.placement(),
        Command::ExportTrace => runner.export_trace(),
    }
}
