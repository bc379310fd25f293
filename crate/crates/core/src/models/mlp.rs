use super::common::{add_bias, check_batch, col_sums, glorot, logit_grads, softmax_rows};
use super::{MlpConfig, ModelError};
use crate::nncore::{
    dense_softmax, dropout, dropout_mask, embed, example_rng, gemm, init_embedding, logits, BatchOutput,
    DenseSoftmaxLayer, DropoutMode, DropoutSpec, EmbeddingMatrix, Gradients, Mode, Network, NnError, Param,
};
use crate::Exec;

/// Feed-forward baseline: flattened word vectors, one or two hidden layers,
/// dropout on the last hidden layer, dense softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNet {
    pub config: MlpConfig,
    pub embedding: EmbeddingMatrix,
    pub hidden: Vec<DenseSoftmaxLayer>,
    pub output: DenseSoftmaxLayer,
}

pub fn build_mlp(config: &MlpConfig, vocab_rows: usize, seed: u64) -> Result<MlpNet, ModelError> {
    config.validate()?;
    let mut embedding = init_embedding(vocab_rows, config.embedding_dim, seed)?;
    embedding.table.trainable = config.embedding_trainable;
    let mut width = config.seq_len * config.embedding_dim;
    let mut hidden = Vec::with_capacity(config.hidden_layers);
    for l in 0..config.hidden_layers {
        let mut layer = DenseSoftmaxLayer::zeros(&format!("hidden{}", l + 1), width, config.hidden_size);
        glorot(&mut layer.weights, width, config.hidden_size, seed, 1 + l as u64);
        hidden.push(layer);
        width = config.hidden_size;
    }
    let mut output = DenseSoftmaxLayer::zeros("output", width, config.n_classes);
    glorot(&mut output.weights, width, config.n_classes, seed, 1 + hidden.len() as u64);
    Ok(MlpNet { config: config.clone(), embedding, hidden, output })
}

impl MlpNet {
    pub fn from_params(config: &MlpConfig, params: Vec<Param>) -> Result<Self, ModelError> {
        config.validate()?;
        let rows = params.first().map_or(0, |p| p.shape.first().copied().unwrap_or(0));
        let mut net = build_mlp(config, rows.max(2), 0)?;
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
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    batch: usize,
    ids: Vec<u32>,
    /// Input followed by every hidden activation, each `B x width`.
    layers: Vec<Vec<f64>>,
    masks: Option<Vec<f64>>,
    dropped: Vec<f64>,
}

impl Network for MlpNet {
    type Cache = MlpCache;

    fn seq_len(&self) -> usize {
        self.config.seq_len
    }

    fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    fn params(&self) -> Vec<&Param> {
        let mut out = vec![&self.embedding.table];
        for layer in &self.hidden {
            out.push(&layer.weights);
            out.push(&layer.biases);
        }
        out.push(&self.output.weights);
        out.push(&self.output.biases);
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = vec![&mut self.embedding.table];
        for layer in &mut self.hidden {
            out.push(&mut layer.weights);
            out.push(&mut layer.biases);
        }
        out.push(&mut self.output.weights);
        out.push(&mut self.output.biases);
        out
    }

    fn forward_batch(
        &self,
        batch: &[&[u32]],
        mode: Mode,
        keep_cache: bool,
        exec: Exec,
    ) -> Result<BatchOutput<MlpCache>, NnError> {
        let n = self.seq_len();
        check_batch(batch, n, self.embedding.rows())?;
        let bsz = batch.len();
        let k = self.embedding.dim();
        let mut x = Vec::with_capacity(bsz * n * k);
        for ids in batch {
            for &id in *ids {
                x.extend_from_slice(self.embedding.row(id as usize));
            }
        }
        let act = self.config.activation;
        let mut layers = vec![x];
        for layer in &self.hidden {
            let (fan_in, width) = (layer.inputs(), layer.classes());
            let mut h = vec![0.0; bsz * width];
            gemm(bsz, fan_in, width, layers.last().unwrap(), false, &layer.weights.data, false, 0.0, &mut h);
            add_bias(&mut h, &layer.biases.data);
            h.iter_mut().for_each(|v| *v = act.apply(*v));
            layers.push(h);
        }
        let width = self.output.inputs();
        let top = layers.last().unwrap();
        let masks = match mode {
            Mode::Train { seed } if self.config.keep_prob < 1.0 => Some(
                exec.map_range(bsz, |i| dropout_mask(width, self.config.keep_prob, &mut example_rng(seed, i)))
                    .concat(),
            ),
            _ => None,
        };
        let dropped: Vec<f64> = match &masks {
            Some(mask) => top.iter().zip(mask).map(|(z, r)| z * r).collect(),
            None => top.clone(),
        };
        let c = self.n_classes();
        let mut y = vec![0.0; bsz * c];
        gemm(bsz, width, c, &dropped, false, &self.output.weights.data, false, 0.0, &mut y);
        add_bias(&mut y, &self.output.biases.data);
        let probs = softmax_rows(&y, c);
        let cache = keep_cache.then(|| MlpCache {
            batch: bsz,
            ids: batch.concat(),
            layers,
            masks,
            dropped,
        });
        Ok(BatchOutput { probs, cache })
    }

    fn backward_batch(&self, out: &BatchOutput<MlpCache>, labels: &[usize], _exec: Exec) -> Result<Gradients, NnError> {
        let cache = out.cache.as_ref().ok_or(NnError::StateMissing)?;
        let bsz = cache.batch;
        let c = self.n_classes();
        let dy = logit_grads(&out.probs, labels, c)?;
        let mut grads = Gradients::zeros_like(&self.params());
        let last = grads.tensors.len();

        let width = self.output.inputs();
        let mut dw = vec![0.0; width * c];
        gemm(width, bsz, c, &cache.dropped, true, &dy, false, 0.0, &mut dw);
        grads.tensors[last - 2] = dw;
        grads.tensors[last - 1] = col_sums(&dy, c);

        let mut dh = vec![0.0; bsz * width];
        gemm(bsz, c, width, &dy, false, &self.output.weights.data, true, 0.0, &mut dh);
        if let Some(mask) = &cache.masks {
            dh.iter_mut().zip(mask).for_each(|(g, r)| *g *= r);
        }
        let act = self.config.activation;
        for (l, layer) in self.hidden.iter().enumerate().rev() {
            let (fan_in, w) = (layer.inputs(), layer.classes());
            let h = &cache.layers[l + 1];
            dh.iter_mut().zip(h).for_each(|(g, &y)| *g *= act.derivative_from_output(y));
            let mut dwl = vec![0.0; fan_in * w];
            gemm(fan_in, bsz, w, &cache.layers[l], true, &dh, false, 0.0, &mut dwl);
            grads.tensors[1 + 2 * l] = dwl;
            grads.tensors[2 + 2 * l] = col_sums(&dh, w);
            let mut below = vec![0.0; bsz * fan_in];
            gemm(bsz, w, fan_in, &dh, false, &layer.weights.data, true, 0.0, &mut below);
            dh = below;
        }

        let k = self.embedding.dim();
        let de = &mut grads.tensors[0];
        for (pos, &id) in cache.ids.iter().enumerate() {
            let id = id as usize;
            de[id * k..(id + 1) * k]
                .iter_mut()
                .zip(&dh[pos * k..(pos + 1) * k])
                .for_each(|(a, g)| *a += g);
        }
        Ok(grads)
    }

    fn forward_reference(&self, ids: &[u32], mode: Mode, index: usize) -> Result<Vec<f64>, NnError> {
        let mut h = embed(ids, &self.embedding)?.data;
        for layer in &self.hidden {
            h = logits(&h, layer)?.into_iter().map(|v| self.config.activation.apply(v)).collect();
        }
        if let Mode::Train { seed } = mode {
            let spec = DropoutSpec { keep_prob: self.config.keep_prob, mode: DropoutMode::Train };
            h = dropout(&h, spec, &mut example_rng(seed, index));
        }
        dense_softmax(&h, &self.output)
    }

    fn routing(&self, cache: &MlpCache) -> Vec<u32> {
        let act = self.config.activation;
        cache.layers[1..]
            .iter()
            .flatten()
            .map(|&y| (act.derivative_from_output(y) > 0.0) as u32)
            .collect()
    }
}
