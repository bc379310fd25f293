use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::normalize::tokens;
use super::TextprepError;

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Whole-table size used when none is given: 12 812 words plus the two
/// reserved entries.
pub const DEFAULT_VOCAB_SIZE: usize = 12_814;

/// Word to integer id table. Id 0 is padding, id 1 the unknown word; real
/// words start at 2. Ids need not be dense (a hand-built table may skip ids),
/// but the mapping is always a bijection over the assigned ids.
///
/// Equality compares the mapping only; `max_size` is a build-time cap.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    word_to_id: HashMap<String, u32>,
    id_to_word: Vec<Option<String>>,
    max_size: usize,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.id_to_word == other.id_to_word
    }
}

impl Eq for Vocabulary {}

impl Vocabulary {
    /// Ranks words by descending frequency (ties lexicographically
    /// ascending) and keeps the top `max_size - 2`.
    pub fn build<S: AsRef<str>>(corpus: &[S], max_size: usize) -> Result<Self, TextprepError> {
        if max_size < 3 {
            return Err(TextprepError::InvalidArgument(format!(
                "vocabulary max_size must be >= 3, got {max_size}"
            )));
        }
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for q in corpus {
            for w in tokens(q.as_ref()) {
                if w != PAD_TOKEN && w != UNK_TOKEN {
                    *counts.entry(w).or_insert(0) += 1;
                }
            }
        }
        let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_size - 2);

        let mut vocab = Self::empty(max_size);
        for (w, _) in ranked {
            let id = vocab.id_to_word.len() as u32;
            vocab.word_to_id.insert(w.to_string(), id);
            vocab.id_to_word.push(Some(w.to_string()));
        }
        Ok(vocab)
    }

    fn empty(max_size: usize) -> Self {
        let mut word_to_id = HashMap::new();
        word_to_id.insert(PAD_TOKEN.to_string(), PAD_ID);
        word_to_id.insert(UNK_TOKEN.to_string(), UNK_ID);
        Vocabulary {
            word_to_id,
            id_to_word: vec![Some(PAD_TOKEN.to_string()), Some(UNK_TOKEN.to_string())],
            max_size,
        }
    }

    /// Builds a table from explicit `(word, id)` pairs. The reserved entries
    /// are added automatically; pairs must not reuse ids 0/1, ids or words.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self, TextprepError>
    where
        I: IntoIterator<Item = (S, u32)>,
        S: Into<String>,
    {
        let mut vocab = Self::empty(usize::MAX);
        for (word, id) in pairs {
            let word = word.into();
            if word == PAD_TOKEN && id == PAD_ID || word == UNK_TOKEN && id == UNK_ID {
                continue;
            }
            if id < 2 {
                return Err(TextprepError::InvalidArgument(format!(
                    "id {id} is reserved, cannot assign it to {word:?}"
                )));
            }
            if vocab.word_to_id.contains_key(&word) {
                return Err(TextprepError::InvalidArgument(format!("duplicate word {word:?}")));
            }
            let slot = id as usize;
            if slot >= vocab.id_to_word.len() {
                vocab.id_to_word.resize(slot + 1, None);
            }
            if vocab.id_to_word[slot].is_some() {
                return Err(TextprepError::InvalidArgument(format!("duplicate id {id}")));
            }
            vocab.id_to_word[slot] = Some(word.clone());
            vocab.word_to_id.insert(word, id);
        }
        vocab.max_size = vocab.table_size();
        Ok(vocab)
    }

    /// Rows needed in an embedding table indexed by this vocabulary.
    pub fn table_size(&self) -> usize {
        self.id_to_word.len()
    }

    /// Number of assigned entries, specials included.
    pub fn len(&self) -> usize {
        self.word_to_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 2
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    /// Id of a real word; padding/unknown markers and unknown words map to
    /// [`UNK_ID`].
    pub fn id(&self, word: &str) -> u32 {
        match self.word_to_id.get(word) {
            Some(&id) if id > UNK_ID => id,
            _ => UNK_ID,
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.word_to_id.contains_key(word)
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.id_to_word.get(id as usize)?.as_deref()
    }

    /// Assigned `(word, id)` entries in ascending id order, specials first.
    pub fn entries(&self) -> impl Iterator<Item = (&str, u32)> {
        self.id_to_word
            .iter()
            .enumerate()
            .filter_map(|(id, w)| w.as_deref().map(|w| (w, id as u32)))
    }

    /// Vocabulary file contents: `word<TAB>id` per line, ascending id.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (w, id) in self.entries() {
            out.push_str(w);
            out.push('\t');
            out.push_str(&id.to_string());
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the vocabulary file contents, lowercase hex. Models record
    /// it so they are never served with a different word table.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_tsv().as_bytes()))
    }
}
