//! Dominant-category prediction for search queries.
//!
//! The crate covers the whole offline pipeline:
//!
//! - [`ingest`]: click-log parsing, noise filtering, per-query click
//!   aggregation and dominance labeling, plus a synthetic log generator.
//! - [`textprep`]: query normalization, vocabulary construction, fixed-length
//!   integer encoding, dataset splitting and persistence.
//! - [`nncore`]: the numeric kernel (embedding, 1-D convolution, max-over-time
//!   pooling, dropout, softmax, cross-entropy, optimizers, gradient checking
//!   and the checkpoint container).
//! - [`models`]: the convolutional classifier, the MLP baselines, training,
//!   evaluation and prediction.
//! - [`pipeline`]: stage glue from click events to train/test datasets.
//!
//! Data-parallel loops go through [`Exec`]; with the `parallel` feature
//! disabled every mode runs sequentially.

pub mod exec;
pub mod fsutil;
pub mod ingest;
pub mod models;
pub mod nncore;
pub mod pipeline;
pub mod textprep;

pub use exec::Exec;
