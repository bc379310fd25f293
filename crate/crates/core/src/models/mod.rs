//! Table-driven CNN and MLP classifiers, the training loop, evaluation and
//! prediction.

mod classifier;
mod common;
mod cnn;
mod config;
mod metrics;
mod mlp;
mod train;

pub use classifier::{Classifier, ModelSpec, Prediction, QueryClassifier};
pub use cnn::{build_cnn, CnnCache, CnnNet};
pub use config::{CnnConfig, MlpConfig, TrainConfig};
pub use metrics::{MetricsCurve, MetricsRow, Split};
pub use mlp::{build_mlp, MlpCache, MlpNet};
pub use train::{evaluate, train, EpochSummary, EvalReport};

use thiserror::Error;

use crate::nncore::NnError;
use crate::textprep::TextprepError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    InvalidArgument(String),
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("query is empty after normalization")]
    EmptyQuery,
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Textprep(#[from] TextprepError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}
