use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Resting-position classification with a 2-layer stacked ensemble.
#[derive(Debug, Parser)]
#[command(name = "posture-stack", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset as CSV.
    Generate(GenerateArgs),
    /// Split, fit the stack, evaluate on the held-out split, save model and report.
    Train(TrainArgs),
    /// Evaluate a saved model on a CSV file.
    Evaluate(EvaluateArgs),
    /// Predict one row with all six learners.
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Classes separated by EGG alone.
    Separated,
    /// Overlapping classes.
    Noisy,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of rows; must be divisible by 3.
    #[arg(long, short)]
    pub n: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Preset::Separated)]
    pub preset: Preset,
    /// JSON file with generator parameters; replaces the preset. `--seed`
    /// still wins over the file's seed.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Paper,
    Oof,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Oof)]
    pub mode: ModeArg,
    /// Shorthand for `--mode paper`: layer 2 learns from in-sample layer-1 predictions.
    #[arg(long, conflicts_with = "mode")]
    pub reproduce_paper: bool,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long)]
    pub model_out: PathBuf,
    #[arg(long)]
    pub report_out: PathBuf,
    /// Also write the held-out split as CSV.
    #[arg(long)]
    pub test_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub report_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub egg: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub heart_rate: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub respiration_rate: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub spo2: f64,
}
