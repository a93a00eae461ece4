use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "polysweep", version, about = "Noisy polynomial regression sweeps over MLP depth, width and MC-dropout ensemble size")]
pub struct Cli {
    /// More log output (-v info, -vv debug, -vvv trace). RUST_LOG takes precedence.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a polynomial, add noise at a target SNR and write the dataset CSV.
    Generate(GenerateArgs),
    /// Train one network on a dataset file, write a checkpoint and print test metrics.
    Train(TrainArgs),
    /// Run (or resume) every cell of a sweep grid.
    Sweep(SweepArgs),
    /// Export a metric matrix over two grid dimensions as CSV.
    Landscape(LandscapeArgs),
    /// Print the optimal depth per width and the ensemble-size curve.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Sweep config (TOML). Defaults to the `desk` preset when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in preset used when no --config is given: desk or full.
    #[arg(long, default_value = "desk", conflicts_with = "config")]
    pub preset: String,
    /// Override a config value, e.g. `--set grid.depths=[1,2]` or `--set train.epochs=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Polynomial order.
    #[arg(long)]
    pub order: usize,
    /// gaussian, exponential or rayleigh.
    #[arg(long, default_value = "gaussian")]
    pub noise: String,
    /// Target signal-to-noise variance ratio, or `inf` for no noise.
    #[arg(long)]
    pub snr: String,
    /// Rows written (train + test).
    #[arg(long)]
    pub size: Option<usize>,
    /// Append an out-of-distribution block as large as the test split.
    #[arg(long)]
    pub with_ood: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Take domain, test fraction and default size from this config's `data` table.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset CSV written by `generate`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    /// MC-dropout members averaged for the reported metrics.
    #[arg(long = "ensemble-size", short = 'm', default_value_t = 1)]
    pub ensemble_size: usize,
    /// Seeds initialisation, shuffling and dropout masks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Results file (JSONL). An existing file is resumed.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    /// Stop after this many new results (the sweep stays resumable).
    #[arg(long)]
    pub stop_after: Option<usize>,
    /// Also write the results as flat CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct LandscapeArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long, default_value = "width")]
    pub x: String,
    #[arg(long, default_value = "depth")]
    pub y: String,
    /// l1, l2, l2_raw, rmse or bd; prefix `ood_` for the out-of-distribution block.
    #[arg(long, default_value = "l1")]
    pub metric: String,
    /// Values for every other dimension, e.g. `order=5,family=gaussian,snr=20,m=1`.
    #[arg(long, default_value = "")]
    pub filter: String,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long, default_value = "l1")]
    pub metric: String,
    /// Must pin order, family and snr unless the results hold a single value for them.
    #[arg(long, default_value = "")]
    pub filter: String,
    /// Ensemble size for the depth table; defaults to the smallest in the results.
    #[arg(long = "ensemble-size", short = 'm')]
    pub ensemble_size: Option<usize>,
    /// Network for the ensemble curve; defaults to the widest network at its optimal depth.
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
}
