//! Text formats for vocabularies and encoded datasets.
//!
//! Vocabulary: `word<TAB>id` per line, ascending id, specials included.
//! Dataset: a header `seq_len=<n> classes=<ids,...> rows=<N>` followed by
//! `label<TAB>space-joined ids` rows.

use std::fs;
use std::path::Path;

use super::dataset::{Dataset, EncodedQuery};
use super::vocab::Vocabulary;
use super::TextprepError;
use crate::fsutil::write_atomic;

fn format_err(msg: impl Into<String>) -> TextprepError {
    TextprepError::FormatVersionMismatch(msg.into())
}

pub fn write_vocab(path: &Path, vocab: &Vocabulary) -> Result<(), TextprepError> {
    let tsv = vocab.to_tsv();
    write_atomic(path, |w| w.write_all(tsv.as_bytes()))?;
    Ok(())
}

pub fn read_vocab(path: &Path) -> Result<Vocabulary, TextprepError> {
    let text = fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    let mut last: Option<u32> = None;
    for (i, line) in text.lines().enumerate() {
        let (word, id) = line
            .split_once('\t')
            .ok_or_else(|| format_err(format!("vocab line {} is not word<TAB>id", i + 1)))?;
        let id: u32 = id
            .parse()
            .map_err(|_| format_err(format!("vocab line {} has a bad id", i + 1)))?;
        if last.is_some_and(|l| id <= l) {
            return Err(format_err(format!("vocab ids not ascending at line {}", i + 1)));
        }
        last = Some(id);
        pairs.push((word.to_string(), id));
    }
    if pairs.len() < 2 || pairs[0] != ("<pad>".into(), 0) || pairs[1] != ("<unk>".into(), 1) {
        return Err(format_err("vocab file must start with <pad>=0 and <unk>=1"));
    }
    Vocabulary::from_pairs(pairs).map_err(|e| format_err(e.to_string()))
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<(), TextprepError> {
    write_atomic(path, |w| {
        let classes: Vec<String> = data.class_ids.iter().map(u32::to_string).collect();
        writeln!(
            w,
            "seq_len={} classes={} rows={}",
            data.seq_len,
            classes.join(","),
            data.len()
        )?;
        for ex in &data.examples {
            let ids: Vec<String> = ex.ids.iter().map(u32::to_string).collect();
            writeln!(w, "{}\t{}", ex.label, ids.join(" "))?;
        }
        Ok(())
    })?;
    Ok(())
}

fn header_field<'a>(fields: &[(&'a str, &'a str)], key: &str) -> Result<&'a str, TextprepError> {
    fields
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| format_err(format!("dataset header lacks `{key}=`")))
}

pub fn read_dataset(path: &Path) -> Result<Dataset, TextprepError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| format_err("empty dataset file"))?;
    let fields: Vec<(&str, &str)> = header
        .split_whitespace()
        .map(|f| f.split_once('=').ok_or_else(|| format_err("malformed dataset header")))
        .collect::<Result<_, _>>()?;
    let seq_len: usize = header_field(&fields, "seq_len")?
        .parse()
        .map_err(|_| format_err("bad seq_len"))?;
    let classes = header_field(&fields, "classes")?;
    let class_ids: Vec<u32> = if classes.is_empty() {
        Vec::new()
    } else {
        classes
            .split(',')
            .map(|c| c.parse().map_err(|_| format_err("bad class id")))
            .collect::<Result<_, _>>()?
    };
    let rows: usize = header_field(&fields, "rows")?
        .parse()
        .map_err(|_| format_err("bad row count"))?;

    let mut examples = Vec::with_capacity(rows);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let (label, ids) = line
            .split_once('\t')
            .ok_or_else(|| format_err(format!("dataset line {lineno} is not label<TAB>ids")))?;
        let label: usize = label
            .parse()
            .map_err(|_| format_err(format!("dataset line {lineno} has a bad label")))?;
        let ids: Vec<u32> = ids
            .split(' ')
            .map(|t| t.parse().map_err(|_| format_err(format!("dataset line {lineno} has a bad id"))))
            .collect::<Result<_, _>>()?;
        if ids.len() != seq_len {
            return Err(format_err(format!(
                "dataset line {lineno} has {} ids, header says {seq_len}",
                ids.len()
            )));
        }
        examples.push(EncodedQuery { ids, label });
    }
    if examples.len() != rows || !text.ends_with('\n') {
        return Err(format_err(format!(
            "dataset truncated: header promises {rows} rows, found {}",
            examples.len()
        )));
    }
    let data = Dataset { examples, class_ids, seq_len };
    data.validate(None).map_err(|e| format_err(e.to_string()))?;
    Ok(data)
}

/// Writes a dataset together with the vocabulary that encoded it.
pub fn persist_dataset(
    data: &Dataset,
    vocab: &Vocabulary,
    dataset_path: &Path,
    vocab_path: &Path,
) -> Result<(), TextprepError> {
    write_vocab(vocab_path, vocab)?;
    write_dataset(dataset_path, data)
}

/// Reads a dataset and its vocabulary, checking every id fits the table.
pub fn load_dataset(
    dataset_path: &Path,
    vocab_path: &Path,
) -> Result<(Dataset, Vocabulary), TextprepError> {
    let vocab = read_vocab(vocab_path)?;
    let data = read_dataset(dataset_path)?;
    data.validate(Some(vocab.table_size()))
        .map_err(|e| format_err(e.to_string()))?;
    Ok((data, vocab))
}
