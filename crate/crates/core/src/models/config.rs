use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::nncore::{Activation, OptimizerConfig};
use crate::Exec;

/// Convolutional classifier shape. Defaults are the reference configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnConfig {
    pub embedding_dim: usize,
    pub filter_widths: Vec<usize>,
    pub filters_per_width: usize,
    pub keep_prob: f64,
    pub seq_len: usize,
    pub n_classes: usize,
    pub activation: Activation,
    pub embedding_trainable: bool,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            embedding_dim: 128,
            filter_widths: vec![1, 2, 3],
            filters_per_width: 128,
            keep_prob: 0.5,
            seq_len: 10,
            n_classes: 8,
            activation: Activation::Relu,
            embedding_trainable: true,
        }
    }
}

fn check_keep_prob(p: f64) -> Result<(), ModelError> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidArgument(format!("keep_prob {p} not in (0, 1]")))
    }
}

impl CnnConfig {
    /// Width of the pooled feature vector.
    pub fn penultimate(&self) -> usize {
        self.filter_widths.len() * self.filters_per_width
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidArgument(m));
        if self.embedding_dim == 0 || self.filters_per_width == 0 || self.seq_len == 0 {
            return bad("embedding_dim, filters_per_width and seq_len must be positive".into());
        }
        if self.n_classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.n_classes));
        }
        if self.filter_widths.is_empty() || self.filter_widths.contains(&0) {
            return bad(format!("filter widths {:?} must be non-empty and positive", self.filter_widths));
        }
        if let Some(&w) = self.filter_widths.iter().find(|&&w| w > self.seq_len) {
            return bad(format!("filter width {w} exceeds seq_len {}", self.seq_len));
        }
        check_keep_prob(self.keep_prob)
    }
}

/// Feed-forward baseline over the flattened embedded query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub embedding_dim: usize,
    pub hidden_layers: usize,
    pub hidden_size: usize,
    pub keep_prob: f64,
    pub seq_len: usize,
    pub n_classes: usize,
    pub activation: Activation,
    pub embedding_trainable: bool,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            embedding_dim: 128,
            hidden_layers: 2,
            hidden_size: 200,
            keep_prob: 0.5,
            seq_len: 10,
            n_classes: 8,
            activation: Activation::Relu,
            embedding_trainable: true,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidArgument(m));
        if !(1..=2).contains(&self.hidden_layers) {
            return bad(format!("hidden_layers must be 1 or 2, got {}", self.hidden_layers));
        }
        if self.embedding_dim == 0 || self.hidden_size == 0 || self.seq_len == 0 {
            return bad("embedding_dim, hidden_size and seq_len must be positive".into());
        }
        if self.n_classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.n_classes));
        }
        check_keep_prob(self.keep_prob)
    }
}

/// Optimization schedule shared by both model families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    /// Fixed reduction order. The kernel always reduces in a fixed order, so
    /// this only gets recorded; it is kept for configuration compatibility.
    pub deterministic: bool,
    /// Return the epoch with the best eval accuracy instead of the last one.
    pub best_on_eval: bool,
    pub exec: Exec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            epochs: 100,
            optimizer: OptimizerConfig::default(),
            seed: 0,
            deterministic: true,
            best_on_eval: false,
            exec: Exec::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.batch_size == 0 {
            return Err(ModelError::InvalidArgument("batch_size must be positive".into()));
        }
        self.optimizer.validate()?;
        Ok(())
    }
}
