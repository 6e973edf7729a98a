//! `ews`: early-warning-model experiments from the command line.
//!
//! Every run reads one TOML config (overridable by flags), executes a
//! protocol from the core library, and writes deterministic artifacts plus
//! a manifest into an output directory. Errors leave a machine-readable
//! JSON record on stderr and a conventional exit code: 2 configuration,
//! 3 data, 4 numeric.

mod artifacts;
mod commands;
mod config;
mod data;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::SynthParams;
use crate::config::{Overrides, RunConfig};
use crate::error::{CliError, Result};

#[derive(Parser)]
#[command(
    name = "ews",
    version,
    about = "Early-warning-model horse races with preference-weighted evaluation"
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (also EWS_WORKERS); default uses all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Significance level, overriding the config.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Preference weight on missed crises, overriding the config.
    #[arg(long, global = true)]
    mu: Option<f64>,
    /// Cross-validation folds, overriding the config.
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// Resampling replicates, overriding the config.
    #[arg(long, global = true)]
    replicates: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the input data and write normalized copies.
    Ingest,
    /// Score every [[grid]] spec by cross-validated usefulness.
    Gridsearch,
    /// The K-fold cross-validated horse race.
    RaceCv,
    /// The recursive real-time horse race.
    RaceRecursive,
    /// Performance uncertainty: the race repeated over reshuffled folds.
    RobustCv,
    /// Output uncertainty: the recursive race over bootstrapped samples.
    RobustRecursive,
    /// Probability and threshold bands only, from the recursive bootstrap.
    Bands {
        /// Restrict output to these methods (repeatable).
        #[arg(long = "method")]
        methods: Vec<String>,
    },
    /// Pretty-print the tables of a finished output directory.
    Report {
        /// Output directory to read (defaults to --out).
        dir: Option<PathBuf>,
    },
    /// Generate a synthetic panel and a ready-to-run config.
    Synth {
        #[arg(long, default_value_t = 15)]
        countries: usize,
        #[arg(long, default_value_t = 120)]
        quarters: usize,
        /// Two per country spreads crises across the whole calendar, which
        /// keeps the recursive prediction window supplied with positives.
        #[arg(long, default_value_t = 30)]
        events: usize,
        /// Mean shift of the informative indicators in pre-crisis windows.
        #[arg(long, default_value_t = 1.5)]
        strength: f64,
    },
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            mu: self.mu,
            folds: self.folds,
            replicates: self.replicates,
            alpha: self.alpha,
        }
    }

    fn load_config(&self) -> Result<(RunConfig, String)> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::config("missing --config"))?;
        RunConfig::load(path, self.overrides())
    }
}

fn setup_workers(flag: Option<usize>) -> Result<()> {
    let workers = match flag {
        Some(n) => Some(n),
        None => match std::env::var("EWS_WORKERS") {
            Ok(v) => Some(v.parse::<usize>().map_err(|_| {
                CliError::config(format!("EWS_WORKERS must be a positive integer, got {v:?}"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::config("worker count must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    setup_workers(cli.workers)?;
    match &cli.command {
        Command::Ingest => {
            let (cfg, canonical) = cli.load_config()?;
            commands::ingest(&cfg, &canonical, &cli.out)
        }
        Command::Gridsearch => {
            let (cfg, canonical) = cli.load_config()?;
            commands::gridsearch(&cfg, &canonical, &cli.out)
        }
        Command::RaceCv => {
            let (cfg, canonical) = cli.load_config()?;
            commands::race_cv(&cfg, &canonical, &cli.out)
        }
        Command::RaceRecursive => {
            let (cfg, canonical) = cli.load_config()?;
            commands::race_recursive(&cfg, &canonical, &cli.out)
        }
        Command::RobustCv => {
            let (cfg, canonical) = cli.load_config()?;
            commands::robust_cv(&cfg, &canonical, &cli.out)
        }
        Command::RobustRecursive => {
            let (cfg, canonical) = cli.load_config()?;
            commands::robust_recursive(&cfg, &canonical, &cli.out)
        }
        Command::Bands { methods } => {
            let (cfg, canonical) = cli.load_config()?;
            commands::bands(&cfg, &canonical, &cli.out, methods)
        }
        Command::Report { dir } => {
            let dir = dir
                .clone()
                .or_else(|| cli.out.clone())
                .ok_or_else(|| CliError::config("missing directory: pass it or --out"))?;
            commands::report(&dir)
        }
        Command::Synth {
            countries,
            quarters,
            events,
            strength,
        } => commands::synth(
            &SynthParams {
                countries: *countries,
                quarters: *quarters,
                events: *events,
                strength: *strength,
                seed: cli.seed.unwrap_or(42),
            },
            &cli.out,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({
                "code": e.exit_code(),
                "error": e.to_string(),
            });
            eprintln!("{record}");
            ExitCode::from(e.exit_code())
        }
    }
}
