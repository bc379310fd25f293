use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::normalize::tokens;
use super::vocab::{Vocabulary, PAD_ID};
use super::TextprepError;

/// Sequence length used when none is given.
pub const DEFAULT_SEQ_LEN: usize = 10;

/// Maps a normalized query to exactly `seq_len` ids: known words keep their
/// id, unknown words become [`super::UNK_ID`], the tail is padded with 0 and
/// anything past `seq_len` tokens is dropped.
pub fn encode(query: &str, vocab: &Vocabulary, seq_len: usize) -> Vec<u32> {
    let mut ids: Vec<u32> = tokens(query).take(seq_len).map(|w| vocab.id(w)).collect();
    ids.resize(seq_len, PAD_ID);
    ids
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedQuery {
    pub ids: Vec<u32>,
    /// Class index into [`Dataset::class_ids`].
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub examples: Vec<EncodedQuery>,
    /// Category id of each class index.
    pub class_ids: Vec<u32>,
    pub seq_len: usize,
}

impl Dataset {
    /// Encodes `(normalized query, category id)` pairs.
    ///
    /// With `class_ids = None` the classes are the distinct categories seen,
    /// ascending. With an explicit list, a category outside it is an error.
    pub fn from_labeled<'a, I>(
        labeled: I,
        vocab: &Vocabulary,
        seq_len: usize,
        class_ids: Option<&[u32]>,
    ) -> Result<Self, TextprepError>
    where
        I: IntoIterator<Item = (&'a str, u32)>,
    {
        if seq_len == 0 {
            return Err(TextprepError::InvalidArgument("seq_len must be >= 1".into()));
        }
        let labeled: Vec<(&str, u32)> = labeled.into_iter().collect();
        let class_ids = match class_ids {
            Some(ids) => ids.to_vec(),
            None => {
                let mut ids: Vec<u32> = labeled.iter().map(|&(_, c)| c).collect();
                ids.sort_unstable();
                ids.dedup();
                ids
            }
        };
        let examples = labeled
            .iter()
            .map(|&(q, cat)| {
                let label = class_ids
                    .iter()
                    .position(|&c| c == cat)
                    .ok_or(TextprepError::UnknownCategory(cat))?;
                Ok(EncodedQuery { ids: encode(q, vocab, seq_len), label })
            })
            .collect::<Result<Vec<_>, TextprepError>>()?;
        Ok(Dataset { examples, class_ids, seq_len })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_ids.len()
    }

    /// Checks the structural invariants; `vocab_rows` additionally bounds ids.
    pub fn validate(&self, vocab_rows: Option<usize>) -> Result<(), TextprepError> {
        for (i, ex) in self.examples.iter().enumerate() {
            if ex.ids.len() != self.seq_len {
                return Err(TextprepError::InvalidArgument(format!(
                    "example {i} has {} ids, expected {}",
                    ex.ids.len(),
                    self.seq_len
                )));
            }
            if ex.label >= self.class_ids.len() {
                return Err(TextprepError::InvalidArgument(format!(
                    "example {i} label {} out of {} classes",
                    ex.label,
                    self.class_ids.len()
                )));
            }
            if let Some(rows) = vocab_rows {
                if let Some(&bad) = ex.ids.iter().find(|&&id| id as usize >= rows) {
                    return Err(TextprepError::InvalidArgument(format!(
                        "example {i} id {bad} outside vocabulary of {rows} rows"
                    )));
                }
            }
        }
        Ok(())
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            examples: idx.iter().map(|&i| self.examples[i].clone()).collect(),
            class_ids: self.class_ids.clone(),
            seq_len: self.seq_len,
        }
    }
}

/// Seeded shuffle, then the first `ceil(N * ratio)` examples train and the
/// rest test.
pub fn split(data: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset), TextprepError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(TextprepError::InvalidArgument(format!(
            "split ratio must be in (0, 1), got {ratio}"
        )));
    }
    let n = data.len();
    // Shave one part in 1e12 so products like 0.3 * 10 = 3.0000000000000004
    // do not round up to an extra example.
    let n_train = ((n as f64) * ratio * (1.0 - 1e-12)).ceil() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, test) = idx.split_at(n_train.min(n));
    Ok((data.subset(train), data.subset(test)))
}
