use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use grace_core::eval::Sweep;
use grace_core::explainer::Degree;
use grace_core::generator::{Anchor, GenerationConfig};
use grace_core::metrics::{InfoGainVariant, Method};
use grace_core::ranking::RankingMode;
use grace_core::synth::SynthKind;

/// Contrastive explanations for tabular neural-network classifiers.
#[derive(Debug, Parser)]
#[command(name = "grace", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a classifier and write it as JSON.
    Train(TrainArgs),
    /// Explain one row of a dataset with a trained model.
    Explain(ExplainArgs),
    /// Score explanation methods over the test split.
    Evaluate(EvaluateArgs),
    /// Show the feature ranking for one row.
    Rank(RankArgs),
    /// Write a synthetic dataset and its manifest.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset manifest (.toml) or CSV file.
    #[arg(long)]
    pub data: PathBuf,
    /// Label column, required when --data is a CSV file.
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Seed for splitting and weight initialization.
    #[arg(long, env = "GRACE_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainFlags {
    /// Hidden layer sizes, e.g. `15,7`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Train/validation/test proportions.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub split: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct GenerationFlags {
    /// Maximum number of perturbed features.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Symmetrical Uncertainty bound between perturbed features.
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    /// Projection iterations per attempt.
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value = "gradient")]
    pub mode: RankingMode,
    #[arg(long, default_value = "original")]
    pub anchor: Anchor,
    #[arg(long, default_value_t = 1.02)]
    pub overshoot: f64,
    /// Neighbors per class for local ranking.
    #[arg(long, default_value_t = 4)]
    pub neighbors: usize,
}

impl GenerationFlags {
    pub fn config(&self) -> GenerationConfig {
        GenerationConfig {
            max_features: self.k,
            gamma: self.gamma,
            steps: self.steps,
            mode: self.mode,
            overshoot: self.overshoot,
            anchor: self.anchor,
            neighbors: self.neighbors,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Where to write the model.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Row index in the dataset file (0-based, header excluded).
    #[arg(long)]
    pub row: usize,
    #[command(flatten)]
    pub generation: GenerationFlags,
    /// Template id; picked from the seed and row when omitted.
    #[arg(long)]
    pub template: Option<String>,
    /// TOML file with templates and plain-language feature names.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Who the sentence is about, e.g. "the patient".
    #[arg(long)]
    pub subject: Option<String>,
    /// One obscurity degree for all changes, or one per change.
    #[arg(long, value_delimiter = ',')]
    pub degree: Vec<Degree>,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Use this model instead of training one.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub generation: GenerationFlags,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "grace-gradient,grace-local,deepfool,nearestct"
    )]
    pub methods: Vec<Method>,
    /// Retrain with seeds seed..seed+runs-1 and average.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    #[arg(long)]
    pub sweep: Option<Sweep>,
    #[arg(long, default_value = "literal")]
    pub info_gain: InfoGainVariant,
    /// Report path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub row: usize,
    #[arg(long, default_value = "gradient")]
    pub mode: RankingMode,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, default_value_t = 4)]
    pub neighbors: usize,
    /// Also write the pairwise SU matrix as CSV.
    #[arg(long)]
    pub su_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub kind: SynthKind,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for `<kind>.csv` and `<kind>.toml`.
    #[arg(long)]
    pub out: PathBuf,
}
