//! The `cgegnn` command-line tool: dataset generation, training,
//! evaluation, run aggregation and property checks.

pub mod checks;
pub mod commands;

use std::path::PathBuf;

use cgegnn_core::datasets::Task;
use cgegnn_core::model::{Head, ModelKind};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::run;

/// Environment variable consulted when no seed is given.
pub const SEED_ENV: &str = "CGEGNN_SEED";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] cgegnn_core::Error),
    /// A property check failed or training diverged.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// 1 property failure or divergence, 2 usage or configuration, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        use cgegnn_core::Error as E;
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Core(E::Io { .. } | E::Format { .. }) => 3,
            CliError::Core(E::NonFiniteGradient(_) | E::NonFiniteLoss(_)) => 1,
            CliError::Core(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cgegnn", version, about = "Clifford group equivariant graph networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset (train/val/test JSONL files plus a manifest).
    Gen(GenArgs),
    /// Train a model and write its best-validation checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split of a dataset.
    Eval(EvalArgs),
    /// Aggregate run summaries into a per-model MSE table.
    Report(ReportArgs),
    /// Run a randomised property suite.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(value_parser = parse_task)]
    pub task: Task,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Total sample count, split evenly between train, val and test.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub train: Option<usize>,
    #[arg(long)]
    pub val: Option<usize>,
    #[arg(long)]
    pub test: Option<usize>,
    /// Points per hull.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Minimum pairwise ∞-norm distance between hull points.
    #[arg(long)]
    pub min_separation: Option<f64>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub softening: Option<f64>,
    /// Reject n-body trajectories whose particles come closer than this.
    #[arg(long)]
    pub collision_floor: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// `key = value` file; flags take precedence over its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory written by `gen`.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Metrics CSV (default: checkpoint path with `.metrics.csv`).
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Run summary CSV (default: checkpoint path with `.run.csv`).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long, value_parser = parse_model)]
    pub model: Option<ModelKind>,
    /// Comma-separated message orders, e.g. `1,2`.
    #[arg(long)]
    pub orders: Option<String>,
    #[arg(long)]
    pub max_order: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub hops: Option<usize>,
    #[arg(long)]
    pub mlp_blocks: Option<usize>,
    #[arg(long)]
    pub fully_connected: Option<bool>,
    #[arg(long)]
    pub max_subsets_per_node: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<u64>,
    #[arg(long)]
    pub eval_interval: Option<u64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub cosine: Option<bool>,
    #[arg(long)]
    pub eval_batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory searched recursively for `*.run.csv` files.
    #[arg(long)]
    pub runs: PathBuf,
    /// Output CSV (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Equivariance,
    Grad,
    Algebra,
    Universality,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(value_enum)]
    pub kind: CheckKind,
    /// Trials (probes per case for `grad`).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Tolerance; for `equivariance` it applies to vector heads.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Invariance tolerance for scalar heads.
    #[arg(long)]
    pub scalar_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Check a trained model instead of random ones.
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    #[arg(long, value_parser = parse_model)]
    pub model: Option<ModelKind>,
    #[arg(long, value_parser = parse_head)]
    pub head: Option<Head>,
    /// Largest graph size for equivariance trials.
    #[arg(long, default_value_t = 8)]
    pub max_nodes: usize,
    /// Lattice resolutions.
    #[arg(long = "K", value_delimiter = ',')]
    pub resolutions: Option<Vec<usize>>,
    /// Point-set sizes.
    #[arg(long = "M", value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Point dimensions.
    #[arg(long = "d", value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|e: cgegnn_core::Error| e.to_string())
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: cgegnn_core::Error| e.to_string())
}

fn parse_head(s: &str) -> Result<Head, String> {
    s.parse().map_err(|e: cgegnn_core::Error| e.to_string())
}
