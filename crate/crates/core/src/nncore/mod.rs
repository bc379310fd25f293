//! Dense numeric kernel: layers, their gradients, optimizers, finite-difference
//! checking and the checkpoint container.
//!
//! Everything computes in `f64`; checkpoints store `f32`.

mod checkpoint;
mod gradcheck;
mod layers;
mod linalg;
mod network;
mod optim;
mod tensor;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, model_version, CheckpointHeader, TensorEntry,
    FORMAT_VERSION, MAGIC,
};
pub use gradcheck::{compare_gradients, grad_check, GradCheckReport};
pub use layers::{
    argmax, conv_forward, cross_entropy, dense_softmax, dropout, dropout_mask, embed,
    init_embedding, logits, max_pool, softmax, Activation, ConvFilterBank, DenseSoftmaxLayer,
    DropoutMode, DropoutSpec, EmbeddingMatrix, FeatureMap, Pooled, PROB_FLOOR,
};
pub use linalg::{dot, gemm};
pub use network::{batch_loss, example_rng, loss_gradient, BatchOutput, Mode, Network};
pub use optim::{Algorithm, Optimizer, OptimizerConfig};
pub use tensor::{Gradients, Matrix, Param};

pub(crate) use layers::uniform_open;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("index {index} out of range for {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },
    #[error("backward called without a cached forward pass")]
    StateMissing,
    #[error("format/version mismatch: {0}")]
    FormatVersionMismatch(String),
    #[error("model was built for vocabulary {expected}, got {actual}")]
    VocabHashMismatch { expected: String, actual: String },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}
