use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use exciton_cli::config::{parse_entries, parse_override, Entry};
use exciton_cli::{run, Experiment, ExperimentConfig, RunError};
use exciton_core::pool::WorkerPool;

/// Excitation transfer along vibrating molecular chains.
#[derive(Parser)]
#[command(name = "exciton", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV tables plus a manifest.
    Run {
        /// Experiment name; otherwise taken from the config.
        experiment: Option<String>,
        /// Config file of `key = value` lines.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a key, e.g. `--set motion.a=0.2`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory (overrides `run.out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: `run.workers`, else all cores).
        #[arg(long, env = "EXCITON_WORKERS")]
        workers: Option<usize>,
        /// Suppress progress output.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Check a config file and report every problem.
    Validate {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the default config of an experiment.
    Preset { experiment: String },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn read_entries(path: &PathBuf) -> Result<Vec<Entry>, RunError> {
    let text = fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.clone(),
        source,
    })?;
    parse_entries(&text).map_err(RunError::Config)
}

fn parse_overrides(raw: &[String]) -> Result<Vec<Entry>, RunError> {
    let (ok, bad): (Vec<_>, Vec<_>) = raw.iter().map(|s| parse_override(s)).partition(Result::is_ok);
    if bad.is_empty() {
        Ok(ok.into_iter().map(Result::unwrap).collect())
    } else {
        Err(RunError::Config(bad.into_iter().map(|e| e.unwrap_err()).collect()))
    }
}

fn resolve(
    experiment: Option<&str>,
    config: Option<&PathBuf>,
    overrides: &[String],
) -> Result<ExperimentConfig, RunError> {
    let experiment = experiment
        .map(|s| s.parse::<Experiment>())
        .transpose()
        .map_err(|e| RunError::Config(vec![e]))?;
    let file = config.map(read_entries).transpose()?.unwrap_or_default();
    let overrides = parse_overrides(overrides)?;
    ExperimentConfig::resolve(experiment, &file, &overrides).map_err(RunError::Config)
}

fn dispatch(command: Command) -> Result<(), RunError> {
    match command {
        Command::Run {
            experiment,
            config,
            overrides,
            out,
            workers,
            quiet,
        } => {
            let mut cfg = resolve(experiment.as_deref(), config.as_ref(), &overrides)?;
            if let Some(out) = out {
                cfg.run.out = out;
            }
            let workers = workers
                .or(cfg.run.workers)
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let pool = WorkerPool::new(workers)?;
            let mut log = |line: &str| {
                if !quiet {
                    eprintln!("{line}");
                }
            };
            let out_dir = cfg.run.out.clone();
            let summary = run(&cfg, &pool, &out_dir, &mut log)?;
            if !quiet {
                eprintln!(
                    "done in {:.2} s; manifest {}",
                    summary.wall_seconds,
                    summary.manifest.display()
                );
            }
            Ok(())
        }
        Command::Validate { config, overrides } => {
            let cfg = resolve(None, Some(&config), &overrides)?;
            let errors = cfg.validate();
            if errors.is_empty() {
                println!("ok");
                Ok(())
            } else {
                Err(RunError::Config(errors))
            }
        }
        Command::Preset { experiment } => {
            let experiment: Experiment = experiment.parse().map_err(|e| RunError::Config(vec![e]))?;
            print!("{}", ExperimentConfig::preset(experiment).to_text());
            Ok(())
        }
    }
}
