use super::common::{add_bias, check_batch, col_sums, glorot, logit_grads, softmax_rows};
use super::{CnnConfig, ModelError};
use crate::nncore::{
    conv_forward, dense_softmax, dropout, dropout_mask, embed, example_rng, gemm, init_embedding, max_pool,
    BatchOutput, ConvFilterBank, DenseSoftmaxLayer, DropoutMode, DropoutSpec, EmbeddingMatrix, Gradients, Mode,
    Network, NnError, Param,
};
use crate::Exec;

/// Embedding, one filter bank per width, max-over-time pooling, dropout and
/// a dense softmax layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnNet {
    pub config: CnnConfig,
    pub embedding: EmbeddingMatrix,
    pub banks: Vec<ConvFilterBank>,
    pub dense: DenseSoftmaxLayer,
}

/// Builds and initializes a network. Embedding entries are uniform(-1, 1);
/// filters and dense weights use fan-scaled uniform draws; biases start at 0.
pub fn build_cnn(config: &CnnConfig, vocab_rows: usize, seed: u64) -> Result<CnnNet, ModelError> {
    config.validate()?;
    let k = config.embedding_dim;
    let f = config.filters_per_width;
    let mut embedding = init_embedding(vocab_rows, k, seed)?;
    embedding.table.trainable = config.embedding_trainable;
    let mut banks = Vec::with_capacity(config.filter_widths.len());
    for (b, &h) in config.filter_widths.iter().enumerate() {
        let mut bank = ConvFilterBank::zeros(h, f, k);
        glorot(&mut bank.filters, h * k, f, seed, 1 + b as u64);
        banks.push(bank);
    }
    let m = config.penultimate();
    let mut dense = DenseSoftmaxLayer::zeros("dense", m, config.n_classes);
    glorot(&mut dense.weights, m, config.n_classes, seed, 1 + banks.len() as u64);
    Ok(CnnNet { config: config.clone(), embedding, banks, dense })
}

impl CnnNet {
    /// Rebuilds a network from tensors in `params()` order.
    pub fn from_params(config: &CnnConfig, params: Vec<Param>) -> Result<Self, ModelError> {
        config.validate()?;
        let rows = params.first().map_or(0, |p| p.shape.first().copied().unwrap_or(0));
        let mut net = build_cnn(config, rows.max(2), 0)?;
        let slots = net.params_mut();
        if slots.len() != params.len() {
            return Err(NnError::ShapeMismatch(format!("expected {} tensors, got {}", slots.len(), params.len())).into());
        }
        for (slot, p) in slots.into_iter().zip(params) {
            if slot.name != p.name || slot.shape != p.shape {
                return Err(NnError::ShapeMismatch(format!(
                    "tensor {} {:?} does not fit {} {:?}",
                    p.name, p.shape, slot.name, slot.shape
                ))
                .into());
            }
            *slot = p;
        }
        Ok(net)
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn keep_prob(&self) -> f64 {
        self.config.keep_prob
    }
}

/// Forward state kept for the backward pass.
#[derive(Debug, Clone)]
pub struct CnnCache {
    batch: usize,
    /// Distinct ids of the batch, ascending.
    uniq: Vec<u32>,
    /// Per example and position, index into `uniq`.
    slots: Vec<u32>,
    /// `uniq.len() x k` gathered embedding rows.
    x_u: Vec<f64>,
    /// `B x m` pooled activations and the position each came from.
    pooled: Vec<f64>,
    argmax: Vec<u32>,
    /// `B x m` scaled dropout masks, absent when nothing is dropped.
    masks: Option<Vec<f64>>,
    /// `B x m` input of the dense layer.
    dropped: Vec<f64>,
}

impl Network for CnnNet {
    type Cache = CnnCache;

    fn seq_len(&self) -> usize {
        self.config.seq_len
    }

    fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    fn params(&self) -> Vec<&Param> {
        let mut out = vec![&self.embedding.table];
        for bank in &self.banks {
            out.push(&bank.filters);
            out.push(&bank.biases);
        }
        out.push(&self.dense.weights);
        out.push(&self.dense.biases);
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = vec![&mut self.embedding.table];
        for bank in &mut self.banks {
            out.push(&mut bank.filters);
            out.push(&mut bank.biases);
        }
        out.push(&mut self.dense.weights);
        out.push(&mut self.dense.biases);
        out
    }

    fn forward_batch(
        &self,
        batch: &[&[u32]],
        mode: Mode,
        keep_cache: bool,
        exec: Exec,
    ) -> Result<BatchOutput<CnnCache>, NnError> {
        let n = self.seq_len();
        let k = self.embedding.dim();
        let rows = self.embedding.rows();
        check_batch(batch, n, rows)?;
        let bsz = batch.len();

        let mut slot_of = vec![u32::MAX; rows];
        let mut seen: Vec<u32> = batch.iter().flat_map(|ids| ids.iter().copied()).collect();
        seen.sort_unstable();
        seen.dedup();
        for (s, &id) in seen.iter().enumerate() {
            slot_of[id as usize] = s as u32;
        }
        let uniq = seen;
        let slots: Vec<u32> = batch.iter().flat_map(|ids| ids.iter().map(|&id| slot_of[id as usize])).collect();
        let mut x_u = Vec::with_capacity(uniq.len() * k);
        for &id in &uniq {
            x_u.extend_from_slice(self.embedding.row(id as usize));
        }

        // proj[b][u, j*h + o] = <embedding row u, filter j at offset o>
        let u = uniq.len();
        let proj: Vec<Vec<f64>> = self
            .banks
            .iter()
            .map(|bank| {
                let fh = bank.num_filters() * bank.width;
                let mut p = vec![0.0; u * fh];
                gemm(u, k, fh, &x_u, false, &bank.filters.data, true, 0.0, &mut p);
                p
            })
            .collect();

        let act = self.config.activation;
        let m = self.config.penultimate();
        let per_example = exec.map_range(bsz, |i| {
            let ex_slots = &slots[i * n..(i + 1) * n];
            let mut values = Vec::with_capacity(m);
            let mut positions = Vec::with_capacity(m);
            for (bank, p) in self.banks.iter().zip(&proj) {
                let h = bank.width;
                let fh = bank.num_filters() * h;
                for j in 0..bank.num_filters() {
                    let bias = bank.biases.data[j];
                    let mut best = f64::NEG_INFINITY;
                    let mut best_t = 0;
                    for t in 0..=n - h {
                        let mut pre = bias;
                        for o in 0..h {
                            pre += p[ex_slots[t + o] as usize * fh + j * h + o];
                        }
                        let v = act.apply(pre);
                        if t == 0 || v > best {
                            best = v;
                            best_t = t;
                        }
                    }
                    values.push(best);
                    positions.push(best_t as u32);
                }
            }
            (values, positions)
        });
        let mut pooled = Vec::with_capacity(bsz * m);
        let mut argmax = Vec::with_capacity(bsz * m);
        for (v, a) in per_example {
            pooled.extend(v);
            argmax.extend(a);
        }

        let masks = match mode {
            Mode::Train { seed } if self.keep_prob() < 1.0 => Some(
                exec.map_range(bsz, |i| dropout_mask(m, self.keep_prob(), &mut example_rng(seed, i)))
                    .concat(),
            ),
            _ => None,
        };
        let dropped = match &masks {
            Some(mask) => pooled.iter().zip(mask).map(|(z, r)| z * r).collect(),
            None => pooled.clone(),
        };

        let c = self.n_classes();
        let mut y = vec![0.0; bsz * c];
        gemm(bsz, m, c, &dropped, false, &self.dense.weights.data, false, 0.0, &mut y);
        add_bias(&mut y, &self.dense.biases.data);
        let probs = softmax_rows(&y, c);
        let cache = keep_cache.then_some(CnnCache { batch: bsz, uniq, slots, x_u, pooled, argmax, masks, dropped });
        Ok(BatchOutput { probs, cache })
    }

    fn backward_batch(&self, out: &BatchOutput<CnnCache>, labels: &[usize], _exec: Exec) -> Result<Gradients, NnError> {
        let cache = out.cache.as_ref().ok_or(NnError::StateMissing)?;
        let (bsz, n, k, c) = (cache.batch, self.seq_len(), self.embedding.dim(), self.n_classes());
        let m = self.config.penultimate();
        let dy = logit_grads(&out.probs, labels, c)?;

        let mut grads = Gradients::zeros_like(&self.params());
        let last = grads.tensors.len();

        let mut dw = vec![0.0; m * c];
        gemm(m, bsz, c, &cache.dropped, true, &dy, false, 0.0, &mut dw);
        grads.tensors[last - 2] = dw;
        grads.tensors[last - 1] = col_sums(&dy, c);

        let mut dz = vec![0.0; bsz * m];
        gemm(bsz, c, m, &dy, false, &self.dense.weights.data, true, 0.0, &mut dz);
        if let Some(mask) = &cache.masks {
            dz.iter_mut().zip(mask).for_each(|(g, r)| *g *= r);
        }
        let act = self.config.activation;
        dz.iter_mut()
            .zip(&cache.pooled)
            .for_each(|(g, &z)| *g *= act.derivative_from_output(z));

        let u = cache.uniq.len();
        let mut dx_u = vec![0.0; u * k];
        let mut offset = 0;
        for (b, bank) in self.banks.iter().enumerate() {
            let (h, f) = (bank.width, bank.num_filters());
            let fh = f * h;
            let mut dp = vec![0.0; u * fh];
            let mut db = vec![0.0; f];
            for i in 0..bsz {
                let ex_slots = &cache.slots[i * n..(i + 1) * n];
                for j in 0..f {
                    let col = i * m + offset + j;
                    let g = dz[col];
                    if g == 0.0 {
                        continue;
                    }
                    db[j] += g;
                    let t = cache.argmax[col] as usize;
                    for o in 0..h {
                        dp[ex_slots[t + o] as usize * fh + j * h + o] += g;
                    }
                }
            }
            let mut dwf = vec![0.0; fh * k];
            gemm(fh, u, k, &dp, true, &cache.x_u, false, 0.0, &mut dwf);
            gemm(u, fh, k, &dp, false, &bank.filters.data, false, 1.0, &mut dx_u);
            grads.tensors[1 + 2 * b] = dwf;
            grads.tensors[2 + 2 * b] = db;
            offset += f;
        }

        let de = &mut grads.tensors[0];
        for (s, &id) in cache.uniq.iter().enumerate() {
            let id = id as usize;
            de[id * k..(id + 1) * k].copy_from_slice(&dx_u[s * k..(s + 1) * k]);
        }
        Ok(grads)
    }

    fn forward_reference(&self, ids: &[u32], mode: Mode, index: usize) -> Result<Vec<f64>, NnError> {
        let x = embed(ids, &self.embedding)?;
        let mut z = Vec::with_capacity(self.config.penultimate());
        for bank in &self.banks {
            let fm = conv_forward(&x, bank, self.config.activation)?;
            z.extend(max_pool(&fm)?.values);
        }
        let z = match mode {
            Mode::Inference => z,
            Mode::Train { seed } => {
                let spec = DropoutSpec { keep_prob: self.keep_prob(), mode: DropoutMode::Train };
                dropout(&z, spec, &mut example_rng(seed, index))
            }
        };
        dense_softmax(&z, &self.dense)
    }

    fn routing(&self, cache: &CnnCache) -> Vec<u32> {
        let act = self.config.activation;
        cache
            .argmax
            .iter()
            .zip(&cache.pooled)
            .map(|(&a, &z)| a * 2 + (act.derivative_from_output(z) > 0.0) as u32)
            .collect()
    }
}
