//! Query normalization, vocabulary, fixed-length encoding and datasets.

mod dataset;
mod normalize;
mod persist;
mod vocab;

pub use dataset::{encode, split, Dataset, EncodedQuery, DEFAULT_SEQ_LEN};
pub use normalize::{normalize, tokens};
pub use persist::{
    load_dataset, persist_dataset, read_dataset, read_vocab, write_dataset, write_vocab,
};
pub use vocab::{Vocabulary, DEFAULT_VOCAB_SIZE, PAD_ID, PAD_TOKEN, UNK_ID, UNK_TOKEN};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextprepError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("format/version mismatch: {0}")]
    FormatVersionMismatch(String),
    #[error("category {0} is not one of the dataset classes")]
    UnknownCategory(u32),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}
