//! `querycat` command-line driver.
//!
//! Every subcommand takes its settings from flags, then from the matching
//! `[section]` of an optional `--config` TOML file, then from built-in
//! defaults. Exit codes: 0 success, 1 usage error, 2 data or model error.

mod commands;
mod layered;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use commands::tiny_gradcheck;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

macro_rules! data_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_errors!(
    std::io::Error,
    querycat_core::ingest::IngestError,
    querycat_core::textprep::TextprepError,
    querycat_core::models::ModelError,
    querycat_core::nncore::NnError,
    querycat_serve::ServeError
);

#[derive(Debug, Parser)]
#[command(name = "querycat", version, about = "Query to dominant-category pipeline")]
pub struct Cli {
    /// TOML file with one table per subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic click log (JSON lines).
    Synth(SynthArgs),
    /// Filter, aggregate and label a click log into a TSV of query records.
    Ingest(IngestArgs),
    /// Build the vocabulary, encode and split labeled queries.
    Prepare(PrepareArgs),
    /// Train a classifier and write a checkpoint and metrics CSV.
    Train(TrainArgs),
    /// Report accuracy and the confusion matrix on a dataset.
    Eval(EvalArgs),
    /// Predict the category distribution of one query.
    Predict(PredictArgs),
    /// Serve predictions over HTTP.
    Serve(ServeArgs),
    /// Finite-difference check of the analytic gradients on a tiny model.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthArgs {
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub queries_per_class: Option<usize>,
    #[arg(long)]
    pub clicks_per_query: Option<usize>,
    /// Fraction of clicks sent to a wrong class.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub pool_size: Option<usize>,
    /// Class depends on the order of a marker bigram.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub order_sensitive: Option<bool>,
    /// Shift which words of each pool are frequent.
    #[arg(long)]
    pub pool_offset: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub log_out: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestArgs {
    #[arg(long)]
    pub log_in: Option<PathBuf>,
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
    /// Skip malformed lines instead of failing.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub lenient: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub keep_bots: Option<bool>,
    #[arg(long)]
    pub dedupe_window: Option<u64>,
    #[arg(long)]
    pub min_clicks: Option<u64>,
    /// Comma-separated category ids still in the taxonomy.
    #[arg(long)]
    pub live_categories: Option<String>,
    /// Inclusive unix-seconds window.
    #[arg(long)]
    pub start: Option<u64>,
    #[arg(long)]
    pub end: Option<u64>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareArgs {
    #[arg(long)]
    pub labels_in: Option<PathBuf>,
    #[arg(long)]
    pub vocab_out: Option<PathBuf>,
    /// Training split.
    #[arg(long)]
    pub dataset_out: Option<PathBuf>,
    /// Test split.
    #[arg(long)]
    pub test_out: Option<PathBuf>,
    #[arg(long)]
    pub max_vocab: Option<usize>,
    #[arg(long)]
    pub seq_len: Option<usize>,
    #[arg(long)]
    pub train_ratio: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset_in: Option<PathBuf>,
    /// Evaluated after every epoch.
    #[arg(long)]
    pub eval_in: Option<PathBuf>,
    #[arg(long)]
    pub vocab_in: Option<PathBuf>,
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
    /// cnn or mlp.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    /// Comma-separated window widths.
    #[arg(long)]
    pub filter_widths: Option<String>,
    #[arg(long)]
    pub num_filters: Option<usize>,
    #[arg(long)]
    pub keep_prob: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seq_len: Option<usize>,
    #[arg(long)]
    pub hidden_layers: Option<usize>,
    #[arg(long)]
    pub hidden_size: Option<usize>,
    /// relu or tanh.
    #[arg(long)]
    pub activation: Option<String>,
    /// Freeze the embedding table.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub static_embedding: Option<bool>,
    /// adam or sgd.
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub best_on_eval: Option<bool>,
    /// Disable the rayon thread pool.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub sequential: Option<bool>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalArgs {
    #[arg(long)]
    pub model_in: Option<PathBuf>,
    #[arg(long)]
    pub vocab_in: Option<PathBuf>,
    #[arg(long)]
    pub dataset_in: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictArgs {
    #[arg(long)]
    pub model_in: Option<PathBuf>,
    #[arg(long)]
    pub vocab_in: Option<PathBuf>,
    #[arg(long)]
    pub query: Option<String>,
    #[arg(long)]
    pub top_k: Option<usize>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeArgs {
    #[arg(long)]
    pub model_in: Option<PathBuf>,
    #[arg(long)]
    pub vocab_in: Option<PathBuf>,
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub max_query_bytes: Option<usize>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("querycat: {e}");
            e.exit_code()
        }
    }
}
