//! The `freeinit` command-line tool.
//!
//! Every subcommand reads an [`ExperimentConfig`] (defaults when `--config`
//! is omitted), writes its artifacts into `output_dir` and exits with
//! 0 on success, 2 on configuration errors, 3 on numeric failures and 4
//! when a required artifact is missing.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{run_command, CommandOutcome};
pub use config::{AnalysisSection, ExperimentConfig, ModelSection, SamplerSection, CONFIG_SCHEMA};

use crate::error::Error;
use crate::spectral::FilterFamily;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_MISSING: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "freeinit", version, about = "Initial-noise refinement for video diffusion sampling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment config (JSON). Defaults apply when omitted.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Overrides the root seed from the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct FreeInitFlags {
    /// Number of refinement iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Filter family: gaussian, ideal or butterworth.
    #[arg(long)]
    pub filter: Option<FilterFamily>,
    /// Normalized stop frequency.
    #[arg(long)]
    pub d0: Option<f64>,
    /// Skip noise reinitialization: the diffused sample starts the next pass.
    #[arg(long)]
    pub no_reinit: bool,
    /// Grow the DDIM budget over refinement passes.
    #[arg(long)]
    pub coarse_to_fine: bool,
    /// Write the clean sample of every pass.
    #[arg(long)]
    pub dump_iters: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic dataset and train the denoiser.
    Train(Common),
    /// Plain DDIM sampling from the trained model.
    Sample(Common),
    /// Sampling with iterative initial-noise refinement.
    Freeinit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: FreeInitFlags,
    },
    /// Per-band SNR of the forward process on the dataset or given clips.
    Snr {
        #[command(flatten)]
        common: Common,
        /// Analyse these tensor files instead of the dataset.
        #[arg(long = "input")]
        inputs: Vec<PathBuf>,
    },
    /// Low-frequency mixing experiment.
    Mix(Common),
    /// FreeInit ablation grid.
    Ablate(Common),
    /// Temporal consistency of tensor files.
    Metrics {
        #[command(flatten)]
        common: Common,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

/// Maps a library error onto the exit-code scheme.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } | Error::NonFinite { .. } => EXIT_NUMERIC,
        Error::MissingArtifact(_) | Error::Format { .. } => EXIT_MISSING,
        _ => EXIT_CONFIG,
    }
}

/// Parses `args` (program name first) and runs the command, printing a
/// summary to stdout and errors to stderr. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run_command(&cli.command) {
        Ok(outcome) => {
            for line in outcome.log {
                println!("{line}");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}
