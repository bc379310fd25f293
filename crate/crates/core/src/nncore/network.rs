use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{cross_entropy, PROB_FLOOR};
use super::{Gradients, NnError, Param};
use crate::Exec;

/// Forward-pass mode. Training mode carries the seed from which every
/// example's dropout mask is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Inference,
    Train { seed: u64 },
}

/// Generator for the dropout mask of example `index` within a batch.
pub fn example_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Per-example class distributions plus, optionally, what backward needs.
#[derive(Debug, Clone)]
pub struct BatchOutput<C> {
    pub probs: Vec<Vec<f64>>,
    pub cache: Option<C>,
}

/// A classifier over fixed-length id sequences with hand-written gradients.
pub trait Network: Clone + Send + Sync {
    type Cache: Send + Sync;

    fn seq_len(&self) -> usize;
    fn n_classes(&self) -> usize;
    /// Parameter tensors in a fixed order shared by gradients and checkpoints.
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn forward_batch(
        &self,
        batch: &[&[u32]],
        mode: Mode,
        keep_cache: bool,
        exec: Exec,
    ) -> Result<BatchOutput<Self::Cache>, NnError>;

    /// Gradient of the mean cross-entropy of the batch.
    fn backward_batch(
        &self,
        out: &BatchOutput<Self::Cache>,
        labels: &[usize],
        exec: Exec,
    ) -> Result<Gradients, NnError>;

    /// Single-example forward built directly from the layer primitives.
    /// `index` selects the dropout stream, matching position `index` of a batch.
    fn forward_reference(&self, ids: &[u32], mode: Mode, index: usize) -> Result<Vec<f64>, NnError>;

    /// Discrete choices made by the forward pass (pooling positions,
    /// activation gates). Equal routing means the loss is smooth between
    /// the two parameter settings.
    fn routing(&self, cache: &Self::Cache) -> Vec<u32>;
}

/// Mean cross-entropy.
pub fn batch_loss(probs: &[Vec<f64>], labels: &[usize]) -> Result<f64, NnError> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(NnError::ShapeMismatch(format!(
            "{} outputs for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (p, &l) in probs.iter().zip(labels) {
        total += cross_entropy(p, l)?;
    }
    Ok(total / probs.len() as f64)
}

/// `scale * (probs - onehot(label))`, the logit gradient of softmax
/// cross-entropy. Below the probability floor the loss is constant, so the
/// gradient is zero there.
pub fn loss_gradient(probs: &[f64], label: usize, scale: f64) -> Vec<f64> {
    if probs[label] < PROB_FLOOR {
        return vec![0.0; probs.len()];
    }
    probs
        .iter()
        .enumerate()
        .map(|(c, &p)| scale * (p - if c == label { 1.0 } else { 0.0 }))
        .collect()
}
