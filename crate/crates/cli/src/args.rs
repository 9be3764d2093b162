use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Differential property classification: predict which of two process
/// parameter settings yields the higher material property.
#[derive(Debug, Parser)]
#[command(name = "dpc", version)]
pub struct Cli {
    /// Root seed; every random stream is derived from it [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Print machine-readable JSON on stdout instead of text.
    #[arg(long, global = true)]
    pub json: bool,

    /// Directory for output files.
    #[arg(short = 'o', long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    /// Comma-separated property columns of the input CSV. Defaults to the
    /// `<stem>.schema.json` sidecar next to the CSV, else to `--property`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub properties: Option<Vec<String>>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-experiment dataset with known ground truth.
    Synth(SynthArgs),
    /// Split by experiment, train one backbone, and save the model.
    Train(TrainArgs),
    /// Evaluate a saved model, or train and evaluate backbones over repeats.
    Eval(EvalArgs),
    /// Accuracy versus number of training experiments.
    Curve(CurveArgs),
    /// Which of two parameter vectors yields the higher property.
    Compare(CompareArgs),
    /// Order candidate parameter vectors by pairwise wins.
    Rank(RankArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// JSON generator config; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of experiments [default: 20]
    #[arg(long)]
    pub experiments: Option<usize>,
    /// Samples per experiment [default: 10]
    #[arg(long)]
    pub samples: Option<usize>,
    /// Std of the per-experiment property offset [default: 5]
    #[arg(long)]
    pub sigma_experiment: Option<f64>,
    /// Std of the per-sample measurement noise [default: 2]
    #[arg(long)]
    pub sigma_sample: Option<f64>,
    /// Within-experiment feature jitter, fraction of range width [default: 0.1]
    #[arg(long)]
    pub jitter: Option<f64>,
    /// Ground-truth function: quadratic-interaction or linear [default: quadratic-interaction]
    #[arg(long)]
    pub truth: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Dataset CSV (experiment_id, sample_id, features..., properties...).
    #[arg(long)]
    pub data: PathBuf,
    /// Property to model, e.g. uts, yield_strength, max_load.
    #[arg(long)]
    pub property: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SplitArgs {
    /// Fraction of experiments used for training (rounded half-up).
    #[arg(long, default_value_t = 0.75)]
    pub train_fraction: f64,
    /// File of training experiment ids, one per line; overrides the random split.
    #[arg(long)]
    pub train_ids: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ThresholdArgs {
    /// Threshold as a fraction of the training property's std.
    #[arg(long, default_value_t = 0.01)]
    pub threshold_fraction: f64,
    /// Absolute threshold in property units; overrides --threshold-fraction.
    #[arg(long)]
    pub threshold_abs: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HyperArgs {
    /// Boosting rounds (gbt).
    #[arg(long, default_value_t = 1000)]
    pub n_estimators: usize,
    /// Boosting shrinkage (gbt).
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    /// Maximum tree depth (gbt).
    #[arg(long, default_value_t = 6)]
    pub max_depth: usize,
    /// L2 penalty on leaf weights (gbt).
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Minimum hessian sum per child (gbt).
    #[arg(long, default_value_t = 1.0)]
    pub min_child_weight: f64,
    /// Hidden layer widths (mlp).
    #[arg(long, value_delimiter = ',', default_value = "35,35")]
    pub hidden: Vec<usize>,
    /// Adam step size (mlp).
    #[arg(long, default_value_t = 0.009)]
    pub mlp_lr: f64,
    /// Full-batch training epochs (mlp).
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    /// Cap on training pairs for pair-input backbones; all k^2 by default.
    #[arg(long)]
    pub max_pairs: Option<usize>,
    /// Average both pair orderings at prediction time (pair-input backbones).
    #[arg(long)]
    pub symmetrize: bool,
    /// Class weighting for direct classification: none or inverse-frequency.
    #[arg(long, default_value = "none")]
    pub class_weights: String,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// direct-regression, difference-regression or direct-classification.
    #[arg(long, default_value = "direct-regression")]
    pub backbone: String,
    /// gbt or mlp.
    #[arg(long, default_value = "gbt")]
    pub arch: String,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub threshold: ThresholdArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Saved model; its held-out experiments form the test set.
    #[arg(long, conflicts_with = "oracle")]
    pub model: Option<PathBuf>,
    /// ground_truth.json from `synth`; evaluates the noiseless oracle.
    #[arg(long)]
    pub oracle: Option<PathBuf>,
    /// Comma list of backbones, or "all".
    #[arg(long, default_value = "direct-regression")]
    pub backbone: String,
    /// Comma list of architectures, or "all".
    #[arg(long, default_value = "gbt")]
    pub arch: String,
    /// Training repeats with seeds seed..seed+repeats-1; >= 2 adds a 95% interval.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub threshold: ThresholdArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct CurveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// direct-regression, difference-regression or direct-classification.
    #[arg(long, default_value = "direct-regression")]
    pub backbone: String,
    /// gbt or mlp.
    #[arg(long, default_value = "gbt")]
    pub arch: String,
    /// Training-experiment counts, strictly increasing.
    #[arg(long, value_delimiter = ',', default_value = "3,5,7,9,11,13,15")]
    pub ks: Vec<usize>,
    /// Random subsets per k.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub threshold: ThresholdArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    /// Saved model.
    #[arg(long)]
    pub model: PathBuf,
    /// Comma-separated feature values of candidate A.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "b")]
    pub a: Option<Vec<f64>>,
    /// Comma-separated feature values of candidate B.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "a")]
    pub b: Option<Vec<f64>>,
    /// Two-row CSV with the model's feature columns (A first, B second).
    #[arg(long, conflicts_with_all = ["a", "b"])]
    pub pair_file: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RankArgs {
    /// Saved model.
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with the model's feature columns and an optional candidate_id column.
    #[arg(long)]
    pub candidates: PathBuf,
}
