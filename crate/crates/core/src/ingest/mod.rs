//! Click-log ingestion: parse, filter noise, aggregate collaborative clicks
//! per query and category, and label each query with its dominant category.

mod aggregate;
mod event;
mod label;
mod noise;
mod synth;

pub use aggregate::{aggregate, aggregate_sharded, merge, CategoryCounts};
pub use event::{parse_click_log, write_click_log, ClickEvent, ParsedLog};
pub use label::{label, read_labels, write_labels, QueryRecord};
pub use noise::{filter_noise, NoisePolicy};
pub use synth::{category_id_for_class, generate_synthetic_log, SynthMode, SynthSpec, SyntheticLog};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed record on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
}
