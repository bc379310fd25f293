use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{NnError, Param};

pub const MAGIC: &[u8; 4] = b"QCAT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    /// Architecture and hyperparameters, owned by the model layer.
    pub model: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
    pub vocab_hash: String,
    pub class_ids: Vec<u32>,
}

/// Serializes a header and the listed parameters. Payloads are `f32` little
/// endian, row-major, in manifest order; the manifest is rebuilt from `params`.
pub fn encode_checkpoint(
    model: serde_json::Value,
    vocab_hash: &str,
    class_ids: &[u32],
    params: &[&Param],
) -> Result<Vec<u8>, NnError> {
    let header = CheckpointHeader {
        model,
        tensors: params
            .iter()
            .map(|p| TensorEntry { name: p.name.clone(), shape: p.shape.clone(), trainable: p.trainable })
            .collect(),
        vocab_hash: vocab_hash.to_string(),
        class_ids: class_ids.to_vec(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| NnError::InvalidArgument(e.to_string()))?;
    let payload: usize = params.iter().map(|p| p.len() * 4).sum();
    let mut out = Vec::with_capacity(12 + json.len() + payload);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for p in params {
        for &x in &p.data {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    Ok(out)
}

fn mismatch(msg: impl Into<String>) -> NnError {
    NnError::FormatVersionMismatch(msg.into())
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(CheckpointHeader, Vec<Param>), NnError> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(mismatch("not a checkpoint (bad magic)"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != FORMAT_VERSION {
        return Err(mismatch(format!("checkpoint version {version}, expected {FORMAT_VERSION}")));
    }
    let header_len = word(8) as usize;
    let body = &bytes[12..];
    if body.len() < header_len {
        return Err(mismatch("truncated header"));
    }
    let header: CheckpointHeader =
        serde_json::from_slice(&body[..header_len]).map_err(|e| mismatch(format!("bad header: {e}")))?;
    let mut rest = &body[header_len..];
    let mut params = Vec::with_capacity(header.tensors.len());
    for entry in &header.tensors {
        let n: usize = entry.shape.iter().product();
        if rest.len() < n * 4 {
            return Err(mismatch(format!("truncated payload for {}", entry.name)));
        }
        let (chunk, tail) = rest.split_at(n * 4);
        rest = tail;
        let data = chunk
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        params.push(Param { name: entry.name.clone(), shape: entry.shape.clone(), data, trainable: entry.trainable });
    }
    if !rest.is_empty() {
        return Err(mismatch("trailing bytes after payload"));
    }
    Ok((header, params))
}

/// First 16 hex digits of the SHA-256 of the checkpoint bytes.
pub fn model_version(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))[..16].to_string()
}
