//! Argument parsing and configuration resolution.
//!
//! Settings come from three layers: built-in defaults, an optional TOML
//! config file, and command-line flags. Flags win over the file, the file
//! wins over defaults.

use clap::{Args, Parser, Subcommand};
use loco_core::judge::JudgeConfig;
use loco_core::reward::WeightConfig;
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::time::Duration;
use thiserror::Error;

/// Exit codes: 0 success, 1 usage/config error, 2 data error.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "loco",
    version,
    about = "Reward scoring, reasoning-faithfulness auditing, and cross-task evaluation for multiple-choice benchmarks"
)]
pub struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score model outputs with the weighted three-component reward
    Score(ScoreArgs),
    /// Audit model outputs for self-contradictory reasoning
    Audit(AuditArgs),
    /// Run the toy archetype trainer and write trace CSVs
    TrainToy(TrainToyArgs),
    /// Build the cross-task accuracy matrix from per-pair output files
    Eval(EvalArgs),
    /// Cohen's kappa between two aligned label files
    Kappa(KappaArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonOpts {
    /// Corpus JSONL path
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,

    /// Judge endpoint URL, or "mock" for the offline judge
    #[arg(long, value_name = "URL|mock")]
    pub judge: Option<String>,

    /// Model name sent to remote judge endpoints
    #[arg(long, value_name = "NAME")]
    pub judge_model: Option<String>,

    /// Maximum in-flight judge requests
    #[arg(long, value_name = "N")]
    pub concurrency: Option<usize>,

    /// Judge retries after the first attempt
    #[arg(long, value_name = "N")]
    pub retries: Option<u32>,

    /// Per-attempt judge timeout in seconds
    #[arg(long, value_name = "SECS")]
    pub timeout_secs: Option<u64>,

    /// Disable the judge verdict cache
    #[arg(long)]
    pub no_cache: bool,

    /// Reward weights: preset name (loco-rft | rft) or "w_format,w_loco,w_acc"
    #[arg(long, value_name = "PRESET|TRIPLE")]
    pub weights: Option<String>,

    /// Responses per group
    #[arg(long, value_name = "G")]
    pub group_size: Option<usize>,

    /// Toy policy sampling temperature
    #[arg(long, value_name = "T")]
    pub temperature: Option<f64>,

    /// Toy trainer steps
    #[arg(long, value_name = "N")]
    pub steps: Option<usize>,

    /// RNG seed
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,

    /// Toy trainer learning rate
    #[arg(long, value_name = "LR")]
    pub learning_rate: Option<f64>,

    /// Directory for generated files
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    /// Per-task baseline JSON (task name -> accuracy) for delta reports
    #[arg(long, value_name = "PATH")]
    pub baseline: Option<PathBuf>,

    /// Align outputs to corpus items by position instead of by item id
    #[arg(long)]
    pub positional: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Model outputs JSONL ({"item_id", "output"} per line)
    #[arg(long, value_name = "PATH")]
    pub outputs: Option<PathBuf>,

    #[command(flatten)]
    pub common: CommonOpts,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Model outputs JSONL ({"item_id", "output"} per line)
    #[arg(long, value_name = "PATH")]
    pub outputs: Option<PathBuf>,

    #[command(flatten)]
    pub common: CommonOpts,
}

#[derive(Debug, Args)]
pub struct TrainToyArgs {
    #[command(flatten)]
    pub common: CommonOpts,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory holding one outputs file per (train, test) task pair,
    /// named "<train>__<test>.jsonl"
    #[arg(long, value_name = "DIR")]
    pub outputs: Option<PathBuf>,

    #[command(flatten)]
    pub common: CommonOpts,
}

#[derive(Debug, Args)]
pub struct KappaArgs {
    /// First label file, one label per line
    pub labels_a: PathBuf,

    /// Second label file, aligned with the first
    pub labels_b: PathBuf,
}

/// Config-file counterpart of the flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub corpus: Option<PathBuf>,
    pub outputs: Option<PathBuf>,
    pub judge: Option<String>,
    pub judge_model: Option<String>,
    pub concurrency: Option<usize>,
    pub retries: Option<u32>,
    pub timeout_secs: Option<u64>,
    pub cache: Option<bool>,
    pub weights: Option<String>,
    pub group_size: Option<usize>,
    pub temperature: Option<f64>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub learning_rate: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub baseline: Option<PathBuf>,
    pub positional: Option<bool>,
}

pub fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))
}

/// Fully resolved settings for one command invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub outputs: Option<PathBuf>,
    pub judge: JudgeConfig,
    /// None means "no explicit choice" (train-toy then runs both presets;
    /// score falls back to the loco-rft preset).
    pub weights: Option<WeightConfig>,
    pub group_size: usize,
    pub temperature: f64,
    pub steps: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub out_dir: PathBuf,
    pub baseline: Option<PathBuf>,
    pub positional: bool,
}

pub fn resolve(
    common: &CommonOpts,
    outputs: Option<PathBuf>,
    file: &FileConfig,
) -> Result<RunConfig, CliError> {
    let weights = common
        .weights
        .clone()
        .or_else(|| file.weights.clone())
        .map(|spec| spec.parse::<WeightConfig>().map_err(CliError::Config))
        .transpose()?;
    let judge = JudgeConfig {
        endpoint: common
            .judge
            .clone()
            .or_else(|| file.judge.clone())
            .unwrap_or_else(|| "mock".to_string()),
        model_name: common
            .judge_model
            .clone()
            .or_else(|| file.judge_model.clone())
            .unwrap_or_else(|| "gpt-oss-20b".to_string()),
        max_in_flight: common.concurrency.or(file.concurrency).unwrap_or(256),
        max_retries: common.retries.or(file.retries).unwrap_or(2),
        timeout: Duration::from_secs(common.timeout_secs.or(file.timeout_secs).unwrap_or(30)),
        cache_enabled: if common.no_cache {
            false
        } else {
            file.cache.unwrap_or(true)
        },
    };
    judge
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(RunConfig {
        corpus: common.corpus.clone().or_else(|| file.corpus.clone()),
        outputs: outputs.or_else(|| file.outputs.clone()),
        judge,
        weights,
        group_size: common.group_size.or(file.group_size).unwrap_or(5),
        temperature: common.temperature.or(file.temperature).unwrap_or(1.0),
        steps: common.steps.or(file.steps).unwrap_or(300),
        seed: common.seed.or(file.seed).unwrap_or(0),
        learning_rate: common.learning_rate.or(file.learning_rate).unwrap_or(0.1),
        out_dir: common
            .out_dir
            .clone()
            .or_else(|| file.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
        baseline: common.baseline.clone().or_else(|| file.baseline.clone()),
        positional: common.positional || file.positional.unwrap_or(false),
    })
}

impl RunConfig {
    pub fn corpus_path(&self) -> Result<&Path, CliError> {
        self.corpus
            .as_deref()
            .ok_or_else(|| CliError::Config("missing --corpus (or corpus in config)".to_string()))
    }

    pub fn outputs_path(&self) -> Result<&Path, CliError> {
        self.outputs
            .as_deref()
            .ok_or_else(|| CliError::Config("missing --outputs (or outputs in config)".to_string()))
    }
}
