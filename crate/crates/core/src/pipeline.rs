//! Glue between the stages: click log to labeled records, labeled records to
//! vocabulary and train/test datasets.

use serde::{Deserialize, Serialize};

use crate::ingest::{aggregate_sharded, filter_noise, label, ClickEvent, NoisePolicy, QueryRecord};
use crate::textprep::{split, Dataset, TextprepError, Vocabulary, DEFAULT_SEQ_LEN, DEFAULT_VOCAB_SIZE};
use crate::Exec;

const SHARDS: usize = 16;

/// Filter, aggregate and label. Records come out ascending by query.
pub fn label_events(events: &[ClickEvent], policy: &NoisePolicy, exec: Exec) -> Vec<QueryRecord> {
    let kept = filter_noise(events, policy);
    aggregate_sharded(&kept, SHARDS, exec).iter().map(label).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepareConfig {
    pub max_vocab: usize,
    pub seq_len: usize,
    pub train_ratio: f64,
    pub seed: u64,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        PrepareConfig { max_vocab: DEFAULT_VOCAB_SIZE, seq_len: DEFAULT_SEQ_LEN, train_ratio: 0.5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub vocab: Vocabulary,
    pub train: Dataset,
    pub test: Dataset,
}

/// Builds the vocabulary over every labeled query, encodes each query with
/// its dominant category, and splits.
pub fn prepare(records: &[QueryRecord], cfg: &PrepareConfig) -> Result<Prepared, TextprepError> {
    let corpus: Vec<&str> = records.iter().map(|r| r.query_norm.as_str()).collect();
    let vocab = Vocabulary::build(&corpus, cfg.max_vocab)?;
    let data = Dataset::from_labeled(
        records.iter().map(|r| (r.query_norm.as_str(), r.dominant_category)),
        &vocab,
        cfg.seq_len,
        None,
    )?;
    let (train, test) = split(&data, cfg.train_ratio, cfg.seed)?;
    Ok(Prepared { vocab, train, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_synthetic_log, SynthSpec};

    #[test]
    fn synthetic_log_to_datasets() {
        let log = generate_synthetic_log(&SynthSpec::new(4, 50, 5, 0.0, 40), 1).unwrap();
        let records = label_events(&log.events, &NoisePolicy::default(), Exec::Parallel);
        assert_eq!(records.len(), 200);
        for r in &records {
            assert_eq!(log.truth[&r.query_norm], r.dominant_category);
        }
        let p = prepare(&records, &PrepareConfig::default()).unwrap();
        assert_eq!((p.train.len(), p.test.len()), (100, 100));
        assert_eq!(p.train.class_ids.len(), 4);
        assert_eq!(p, prepare(&records, &PrepareConfig::default()).unwrap());
    }
}
