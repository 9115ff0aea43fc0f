mod cache;
mod commands;
mod config;
mod error;
mod manifest;

use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::commands::{EvalArgs, SegmentArgs, TrainArgs};
use crate::config::ConfigArgs;
use crate::error::{CliError, CliResult};

/// Train, segment and evaluate per-action Gaussian mixture models over
/// gradient and optical-flow descriptors.
#[derive(Debug, Parser)]
#[command(name = "actionseg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one model per action (and scenario) from single-action clips
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// CSV manifest of training clips
        #[arg(long)]
        manifest: PathBuf,
        /// Directory for the model files
        #[arg(long)]
        out: PathBuf,
        /// Skip manifest rows whose fold column equals this value
        #[arg(long, value_name = "N")]
        exclude_fold: Option<usize>,
    },
    /// Segment a video into labelled runs
    Segment {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        models: PathBuf,
        /// PGM directory or .y4m file
        #[arg(long)]
        video: PathBuf,
        /// Segment CSV, stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-window action scores
        #[arg(long, value_name = "CSV")]
        scores: Option<PathBuf>,
    },
    /// Frame-level accuracy over a labelled manifest
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        /// Model directory, optionally holding fold-N subdirectories
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// JSON report, stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a synthetic dataset
    Synth {
        /// TOML or JSON dataset description
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train {
            config,
            manifest,
            out,
            exclude_fold,
        } => {
            let cfg = config.resolve()?;
            let written = commands::train(
                &cfg,
                &TrainArgs {
                    manifest: &manifest,
                    out: &out,
                    exclude_fold,
                },
            )?;
            eprintln!("wrote {} model(s) to {}", written.len(), out.display());
        }
        Command::Segment {
            config,
            models,
            video,
            out,
            scores,
        } => {
            let cfg = config.resolve()?;
            commands::segment(
                &cfg,
                &SegmentArgs {
                    models: &models,
                    video: &video,
                    out: out.as_deref(),
                    scores: scores.as_deref(),
                },
            )?;
        }
        Command::Eval {
            config,
            models,
            manifest,
            out,
        } => {
            let cfg = config.resolve()?;
            let (_, cv) = commands::eval(
                &cfg,
                &EvalArgs {
                    models: &models,
                    manifest: &manifest,
                    out: out.as_deref(),
                },
            )?;
            if out.is_some() {
                eprint!("{cv}");
            }
        }
        Command::Synth { spec, seed, out } => {
            let file = commands::load_synth_file(&spec)?;
            commands::synth(&file, seed, &out)?;
            eprintln!("wrote synthetic dataset to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| run(cli)))
        .unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            Err(CliError::Internal(msg))
        });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("actionseg: {e}");
            e.exit_code()
        }
    }
}
