//! `gwl`: synthesize data, train, tune, predict, smooth, evaluate and ablate
//! the circulation-pattern classifier.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "gwl",
    version,
    about = "Smoothed CNN classifier for anticyclonic circulation patterns"
)]
struct Cli {
    /// Optional key=value settings file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic field file and label file.
    Synth(SynthArgs),
    /// Train a model with early stopping on the last years of the data.
    Train(TrainCmd),
    /// Random search over learning rate and dropout on the train split.
    Tune(TuneCmd),
    /// Write class probabilities for every day of a field file.
    Predict(PredictArgs),
    /// Transition-smooth a probability file.
    Smooth(SmoothArgs),
    /// Nested cross-validation with one ablation setting.
    Evaluate(CvCmd),
    /// Nested cross-validation for all four smoothing combinations.
    Ablate(CvCmd),
    /// Render tables from a metric records file.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for fields.txt and labels.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub days: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// First date (YYYY-MM-DD).
    #[arg(long)]
    pub start: Option<String>,
    /// Noise standard deviation of sea-level pressure, hPa.
    #[arg(long)]
    pub noise_slp: Option<f64>,
    /// Noise standard deviation of 500 hPa height, m.
    #[arg(long)]
    pub noise_z500: Option<f64>,
    /// Success probability of the geometric extra dwell.
    #[arg(long)]
    pub dwell_p: Option<f64>,
    /// Do not blend the days at run boundaries.
    #[arg(long)]
    pub no_blend: bool,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub fields: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Labels use raw catalog codes, mapped to the 7 classes.
    #[arg(long)]
    pub raw_labels: bool,
    /// Catalog mapping file (RAW=CLASS lines); defaults to the built-in table.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Label-smoothing strength on run-boundary days.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub no_label_smoothing: bool,
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Number of final years held out for early stopping.
    #[arg(long)]
    pub val_years: Option<usize>,
    /// Checkpoint path; the epoch history goes to <out>.history.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub val_years: Option<usize>,
    /// Number of random-search trials.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Trial log (CSV).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub fields: Option<PathBuf>,
    /// Probability file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    /// Probability file to smooth.
    #[arg(long)]
    pub probs: Option<PathBuf>,
    /// Smoothed label file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report file; defaults to <out>.report.txt.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Maximum number of passes; default iterates to a fixpoint.
    #[arg(long)]
    pub passes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CvCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub outer_folds: Option<usize>,
    #[arg(long)]
    pub inner_folds: Option<usize>,
    /// Seed of the fold assignment and the tuner.
    #[arg(long)]
    pub fold_seed: Option<u64>,
    /// Random-search trials per outer fold; 0 uses --lr and --dropout.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Inner folds scored per tuning trial.
    #[arg(long)]
    pub tune_folds: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub no_transition_smoothing: bool,
    /// Maximum transition-smoothing passes; default iterates to a fixpoint.
    #[arg(long)]
    pub passes: Option<usize>,
    /// Output directory for the report files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// records.csv written by evaluate or ablate.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = config::FileConfig::load_optional(cli.config.as_deref()).and_then(|file| {
        use commands::*;
        match &cli.command {
            Command::Synth(a) => synth(a, file),
            Command::Train(a) => train(a, file),
            Command::Tune(a) => tune(a, file),
            Command::Predict(a) => predict(a, file),
            Command::Smooth(a) => smooth(a, file),
            Command::Evaluate(a) => evaluate(a, file),
            Command::Ablate(a) => ablate(a, file),
            Command::Report(a) => report(a, file),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gwl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
