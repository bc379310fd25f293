use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nncore::{loss_gradient, softmax, uniform_open, NnError, Param};

/// Fills `p` with uniform(-s, s), `s = sqrt(6 / (fan_in + fan_out))`, from
/// stream `stream` of `seed`.
pub(super) fn glorot(p: &mut Param, fan_in: usize, fan_out: usize, seed: u64, stream: u64) {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    p.data.iter_mut().for_each(|x| *x = uniform_open(&mut rng, bound));
}

pub(super) fn check_batch(batch: &[&[u32]], seq_len: usize, rows: usize) -> Result<(), NnError> {
    if batch.is_empty() {
        return Err(NnError::InvalidArgument("empty batch".into()));
    }
    for ids in batch {
        if ids.len() != seq_len {
            return Err(NnError::ShapeMismatch(format!("sequence of {} ids, model expects {seq_len}", ids.len())));
        }
        if let Some(&id) = ids.iter().find(|&&id| id as usize >= rows) {
            return Err(NnError::IndexOutOfRange { index: id as usize, rows });
        }
    }
    Ok(())
}

/// Adds `bias` to every row of a row-major `rows x bias.len()` matrix.
pub(super) fn add_bias(y: &mut [f64], bias: &[f64]) {
    for row in y.chunks_mut(bias.len()) {
        row.iter_mut().zip(bias).for_each(|(a, b)| *a += b);
    }
}

pub(super) fn softmax_rows(y: &[f64], classes: usize) -> Vec<Vec<f64>> {
    y.chunks(classes).map(softmax).collect()
}

/// Column sums of a row-major matrix, accumulated in row order.
pub(super) fn col_sums(m: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for row in m.chunks(cols) {
        out.iter_mut().zip(row).for_each(|(a, b)| *a += b);
    }
    out
}

/// Gradient of the mean cross-entropy with respect to the logits, `B x C`.
pub(super) fn logit_grads(probs: &[Vec<f64>], labels: &[usize], classes: usize) -> Result<Vec<f64>, NnError> {
    if probs.len() != labels.len() {
        return Err(NnError::ShapeMismatch(format!("{} outputs for {} labels", probs.len(), labels.len())));
    }
    let scale = 1.0 / probs.len() as f64;
    let mut dy = Vec::with_capacity(probs.len() * classes);
    for (p, &l) in probs.iter().zip(labels) {
        if l >= classes {
            return Err(NnError::InvalidArgument(format!("label {l} out of {classes} classes")));
        }
        dy.extend(loss_gradient(p, l, scale));
    }
    Ok(dy)
}

/// SplitMix64 finalizer, used to derive per-step seeds.
pub(super) fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
