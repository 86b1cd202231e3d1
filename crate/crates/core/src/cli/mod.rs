//! Command-line orchestration: `ergomix check|run|preset`.

pub mod config;
pub mod presets;
pub mod run;
pub mod svg;

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{load, parse_config, resolve, ExperimentConfig, Resolved};
pub use presets::{preset, PRESETS};
pub use run::{exit_code, run, RunManifest, RunOutcome};

use crate::error::{Error, Result};

/// Exit status for configuration errors.
pub const EXIT_CONFIG: i32 = 3;
/// Exit status for I/O failures.
pub const EXIT_IO: i32 = 4;
/// Exit status for runtime failures such as a diverged trajectory.
pub const EXIT_RUNTIME: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "ergomix", version, about = "Ergodicity and mixing checks for SPDEs with degenerate additive noise")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run directory (defaults to the config's `out`, then runs/<kind>-<hash>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for ensembles.
    #[arg(long, env = "ERGOMIX_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the closed-form hypotheses for a config.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the experiment described by a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a named preset.
    Preset {
        name: String,
        /// Experiment kind to run instead of the preset's default.
        #[arg(long)]
        kind: Option<String>,
        /// Print the preset's config as TOML and exit.
        #[arg(long)]
        emit: bool,
        #[command(flatten)]
        common: Common,
    },
}

pub fn error_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::ConfigList(_) | Error::Unsupported(_) | Error::NotConfigured(_) | Error::DomainMismatch(_) | Error::Shape { .. } => EXIT_CONFIG,
        Error::Io(_) | Error::Csv(_) => EXIT_IO,
        _ => EXIT_RUNTIME,
    }
}

fn read(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn execute(mut cfg: ExperimentConfig, common: &Common) -> Result<RunOutcome> {
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let out = common.out.clone().or_else(|| cfg.out.clone());
    let r = resolve(cfg)?;
    let out = out.unwrap_or_else(|| PathBuf::from("runs").join(format!("{}-{}", r.config.experiment.name(), &r.config.hash()[..12])));
    run(&r, &out, common.workers)
}

/// Runs a parsed command line; returns the process exit status.
pub fn main_with(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Check { config, common } => read(&config).and_then(|t| parse_config(&t)).and_then(|mut c| {
            if !matches!(c.experiment, config::ExperimentBlock::Check { .. }) {
                c.experiment = presets::experiment_for("", "check")?;
            }
            execute(c, &common)
        }),
        Command::Run { config, common } => read(&config).and_then(|t| parse_config(&t)).and_then(|c| execute(c, &common)),
        Command::Preset { name, kind, emit, common } => {
            let cfg = preset(&name).and_then(|mut c| {
                if let Some(k) = kind {
                    c.experiment = presets::experiment_for(&name, &k)?;
                }
                Ok(c)
            });
            match cfg {
                Ok(c) if emit => {
                    print!("{}", c.to_toml());
                    return 0;
                }
                Ok(c) => execute(c, &common),
                Err(e) => Err(e),
            }
        }
    };
    match result {
        Ok(o) => {
            for l in &o.lines {
                println!("{l}");
            }
            println!("{:?}: results in {}", o.verdict, o.dir.display());
            exit_code(o.verdict)
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_code(&e)
        }
    }
}
