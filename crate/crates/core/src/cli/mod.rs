//! The `sbr` command-line tool.
//!
//! Exit status is 0 on full success, 2 when some samples could not be
//! processed but the command otherwise completed, and 1 on any fatal error
//! (including invalid flags).

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::{resolve, RunConfig};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "SBR_OUTPUT_ROOT";

#[derive(Debug, Parser)]
#[command(name = "sbr", version, about = "Score-based resampling for binary CNN classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// JSON config file; flags take precedence over its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every stage whose seed the config file leaves unset.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default: $SBR_OUTPUT_ROOT/<command>, else runs/<command>).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Echo log events to standard error.
    #[arg(long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Args, Clone, Default)]
pub struct TrainFlags {
    /// Mini-batch size.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Maximum number of epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Epochs without a training-accuracy gain before stopping.
    #[arg(long)]
    pub patience: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with a minority subgroup.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Images per class.
        #[arg(long)]
        n_per_class: Option<usize>,
        /// Share of each class drawn from the minority subgroup.
        #[arg(long)]
        minority_fraction: Option<f64>,
        /// Side length of the square images.
        #[arg(long)]
        image_size: Option<usize>,
        /// Also write train.json and val.json with this share held out.
        #[arg(long)]
        val_fraction: Option<f64>,
    },
    /// Train a CNN; with --sbr run train, audit, resample and retrain.
    Train {
        #[command(flatten)]
        common: Common,
        /// Training manifest.
        #[arg(long)]
        train: PathBuf,
        /// Validation manifest, used for the per-epoch curves only.
        #[arg(long)]
        val: Option<PathBuf>,
        #[command(flatten)]
        flags: TrainFlags,
        /// Run the full resampling pipeline.
        #[arg(long)]
        sbr: bool,
        /// Audit distance above which a sample is flagged.
        #[arg(long)]
        threshold: Option<f64>,
        /// Audit temperature.
        #[arg(long)]
        temperature: Option<f64>,
    },
    /// Score a training set and flag samples far from their label.
    Audit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Flag threshold (default 0.15).
        #[arg(long)]
        threshold: Option<f64>,
        /// Scoring temperature (default 0.85).
        #[arg(long)]
        temperature: Option<f64>,
    },
    /// Add three augmented copies of every flagged sample.
    Resample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        audit: PathBuf,
        /// Re-flag the audit at this threshold instead of its own.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Train the debiasing VAE baseline.
    DbvaeTrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: Option<PathBuf>,
        #[command(flatten)]
        flags: TrainFlags,
        /// Latent dimension.
        #[arg(long)]
        latent_dim: Option<usize>,
        /// KL weight in the VAE loss.
        #[arg(long)]
        kl_coefficient: Option<f64>,
        /// Histogram bins per latent dimension.
        #[arg(long)]
        histogram_bins: Option<usize>,
        /// Added to densities before inverting them.
        #[arg(long)]
        smoothing_alpha: Option<f64>,
        /// Shuffle uniformly instead of drawing by latent density.
        #[arg(long)]
        no_resample: bool,
    },
    /// Fit the RBF-SVM head on a checkpoint's scores.
    SvmFit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Manifest whose scores the head is fitted on.
        #[arg(long)]
        manifest: PathBuf,
        /// Skip grid search; requires --c as well.
        #[arg(long, requires = "c")]
        gamma: Option<f64>,
        #[arg(long, requires = "gamma")]
        c: Option<f64>,
        /// Cross-validation folds.
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Predict a manifest with a CNN, a DB-VAE or a CNN+SVM.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Apply this SVM head to the checkpoint's scores.
        #[arg(long)]
        svm: Option<PathBuf>,
        /// Use an SVM fitted on a different checkpoint (logged as a warning).
        #[arg(long)]
        allow_mismatch: bool,
    },
    /// Per-group accuracy table of Standard CNN, DB-VAE and CNN+SVM.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Directory holding baseline.ckpt, dbvae.ckpt, retrained.ckpt and svm.json.
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        dbvae: Option<PathBuf>,
        #[arg(long)]
        retrained: Option<PathBuf>,
        #[arg(long)]
        svm: Option<PathBuf>,
        /// Test manifest; every sample needs a group tag.
        #[arg(long)]
        test: PathBuf,
        /// Validation manifest for the extra validation row.
        #[arg(long)]
        val: Option<PathBuf>,
        /// Allow SVM heads fitted on a different checkpoint.
        #[arg(long)]
        allow_mismatch: bool,
    },
}

/// Outcome of a command that did not fail outright.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Complete,
    Partial,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Complete => 0,
            Status::Partial => 2,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}
