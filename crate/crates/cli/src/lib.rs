//! Command-line driver: config parsing, experiment execution and output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{Format, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "mgent",
    version,
    about = "Matter-gravity entanglement and reset-dynamics experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; overrides `output.path`. Defaults to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format; overrides `output.format`.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Ensemble size; overrides `ensemble.samples`.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Time series of entropies and purity along one (possibly reset) trajectory.
    Evolve,
    /// Events declared at one time.
    Events,
    /// One sampled reset history.
    Trajectory,
    /// Many trajectories with frequency table and comparison to the branch tree.
    Ensemble,
    /// Exhaustive branch tree, statistical operator and comparison to the never-reset state.
    Branches,
    /// Named scenario from the `[scenario]` section.
    Scenario,
}

impl Command {
    fn default_format(self) -> Format {
        match self {
            Command::Evolve => Format::Csv,
            _ => Format::Json,
        }
    }
}

/// Executes one parsed invocation and writes its primary output.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config: a config file is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    let format = cli
        .format
        .or(cfg.output.format)
        .unwrap_or_else(|| match (&cli.command, &cfg.scenario) {
            (Command::Scenario, Some(config::ScenarioConfig::Growth { .. })) => Format::Csv,
            (c, _) => c.default_format(),
        });
    let rendered = match cli.command {
        Command::Evolve => commands::evolve(&cfg, format)?,
        Command::Events => commands::events(&cfg, format)?,
        Command::Trajectory => commands::trajectory(&cfg, format)?,
        Command::Ensemble => commands::ensemble(&cfg, format, cli.samples)?,
        Command::Branches => commands::branches(&cfg, format)?,
        Command::Scenario => commands::scenario(&cfg, format)?,
    };
    let out = cli.out.clone().or_else(|| cfg.output.path.as_ref().map(PathBuf::from));
    match out {
        Some(p) => std::fs::write(&p, rendered).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(rendered.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

/// Parses `args` (including the program name) and runs them. Argument
/// errors are reported as config errors.
pub fn run_from<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Config(e.to_string()))?;
    run(&cli)
}
