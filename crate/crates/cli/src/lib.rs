//! `ftmf`: a command-line pipeline around the detection library.
//!
//! Three subcommands cover the workflow end to end: `simulate` draws a
//! labeled scenario from a config file, `score` runs detectors over the
//! scenario (or over a raw whitened matrix), and `evaluate` turns a
//! scores file into per-detector metrics. Every artifact is a headered
//! CSV or a JSON manifest, and reruns with the same inputs are
//! byte-identical.
//!
//! Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numerical
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod tables;

use commands::{cmd_evaluate, cmd_score, cmd_simulate, ScoreOptions};
use error::Result;

#[derive(Parser)]
#[command(
    name = "ftmf",
    version,
    about = "Finite-target matched filter detection pipeline",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled scenario from a config file.
    Simulate {
        /// Scenario config (flat `key = value` text).
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        /// Write artifacts here instead of the config's `outputs` dir.
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Score pixels with one or more detectors.
    Score {
        /// Scenario manifest written by `simulate`.
        #[arg(long, value_name = "FILE", conflicts_with = "matrix")]
        manifest: Option<PathBuf>,
        /// Whitened sample matrix (headered CSV, row = pixel).
        #[arg(long, value_name = "FILE", requires = "target")]
        matrix: Option<PathBuf>,
        /// Target signature for --matrix, comma-separated values.
        #[arg(long, value_name = "V1,V2,...", requires = "matrix")]
        target: Option<String>,
        /// Comma-separated detector names; defaults to the manifest
        /// list, or to all six detectors with --matrix.
        #[arg(long, value_name = "LIST")]
        detectors: Option<String>,
        /// Score with this tail index (a number above 2, or `inf`).
        #[arg(long, value_name = "NU", conflicts_with = "estimate_nu")]
        nu_override: Option<f64>,
        /// Estimate the tail index from the data before scoring.
        #[arg(long)]
        estimate_nu: bool,
        /// Output scores file; a scores manifest is written next to it.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Compute per-detector metrics from a scores file.
    Evaluate {
        /// Scores file written by `score`.
        #[arg(long, value_name = "FILE")]
        scores: PathBuf,
        /// Output metrics file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Also write the full ROC curves here.
        #[arg(long, value_name = "FILE")]
        roc_out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out_dir } => cmd_simulate(&config, out_dir.as_deref()),
        Command::Score {
            manifest,
            matrix,
            target,
            detectors,
            nu_override,
            estimate_nu,
            out,
        } => cmd_score(&ScoreOptions {
            manifest,
            matrix,
            target,
            detectors,
            nu_override,
            estimate_nu,
            out,
        }),
        Command::Evaluate {
            scores,
            out,
            roc_out,
        } => cmd_evaluate(&scores, &out, roc_out.as_deref()),
    }
}

/// Parse arguments, run the selected command, and map failures to the
/// documented exit codes.
pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
