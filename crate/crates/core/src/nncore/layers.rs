use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::dot;
use super::{Matrix, NnError, Param};

/// Lower bound applied to the target probability inside the loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// Nonlinearity applied to each convolution output (and MLP hidden unit).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output `y = f(x)`.
    /// ReLU uses 0 at the kink.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Draw strictly inside `(-bound, bound)`.
pub(crate) fn uniform_open<R: Rng>(rng: &mut R, bound: f64) -> f64 {
    loop {
        let x = (2.0 * rng.random::<f64>() - 1.0) * bound;
        if x.abs() < bound {
            return x;
        }
    }
}

/// Word vectors, one row per vocabulary id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    /// `rows x k`.
    pub table: Param,
}

impl EmbeddingMatrix {
    pub fn rows(&self) -> usize {
        self.table.shape[0]
    }

    pub fn dim(&self) -> usize {
        self.table.shape[1]
    }

    pub fn row(&self, id: usize) -> &[f64] {
        let k = self.dim();
        &self.table.data[id * k..(id + 1) * k]
    }
}

/// `rows x k` table of i.i.d. uniform(-1, 1) entries from a seeded generator.
pub fn init_embedding(rows: usize, k: usize, seed: u64) -> Result<EmbeddingMatrix, NnError> {
    if rows < 2 || k == 0 {
        return Err(NnError::InvalidArgument(format!(
            "embedding needs rows >= 2 and k >= 1, got {rows}x{k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = Param::zeros("embedding", &[rows, k]);
    table.data.iter_mut().for_each(|x| *x = uniform_open(&mut rng, 1.0));
    Ok(EmbeddingMatrix { table })
}

/// Gathers the rows for `ids` into an `n x k` matrix.
pub fn embed(ids: &[u32], emb: &EmbeddingMatrix) -> Result<Matrix, NnError> {
    let k = emb.dim();
    let mut out = Matrix::zeros(ids.len(), k);
    for (i, &id) in ids.iter().enumerate() {
        let id = id as usize;
        if id >= emb.rows() {
            return Err(NnError::IndexOutOfRange { index: id, rows: emb.rows() });
        }
        out.data[i * k..(i + 1) * k].copy_from_slice(emb.row(id));
    }
    Ok(out)
}

/// Filters of one window width over `k`-dimensional word vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvFilterBank {
    pub width: usize,
    /// `num_filters x width x k`; filter `j` is the contiguous `width * k`
    /// slice that dots with a flattened window of word vectors.
    pub filters: Param,
    /// `num_filters`.
    pub biases: Param,
}

impl ConvFilterBank {
    pub fn zeros(width: usize, num_filters: usize, k: usize) -> Self {
        ConvFilterBank {
            width,
            filters: Param::zeros(format!("conv{width}.filters"), &[num_filters, width, k]),
            biases: Param::zeros(format!("conv{width}.biases"), &[num_filters]),
        }
    }

    pub fn num_filters(&self) -> usize {
        self.filters.shape[0]
    }

    pub fn dim(&self) -> usize {
        self.filters.shape[2]
    }

    pub fn filter(&self, j: usize) -> &[f64] {
        let len = self.width * self.dim();
        &self.filters.data[j * len..(j + 1) * len]
    }
}

/// Convolution outputs of every filter at every window position.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    /// `num_filters x (n - width + 1)`.
    pub values: Matrix,
}

/// `values[j][i] = f(<filter_j, x[i..i + width]> + b_j)` for every window.
pub fn conv_forward(x: &Matrix, bank: &ConvFilterBank, act: Activation) -> Result<FeatureMap, NnError> {
    let (n, h, k) = (x.rows, bank.width, bank.dim());
    if x.cols != k {
        return Err(NnError::ShapeMismatch(format!("input dim {} vs filter dim {k}", x.cols)));
    }
    if h == 0 || n < h {
        return Err(NnError::ShapeMismatch(format!("sequence of {n} is shorter than width {h}")));
    }
    let positions = n - h + 1;
    let mut values = Matrix::zeros(bank.num_filters(), positions);
    for j in 0..bank.num_filters() {
        let w = bank.filter(j);
        let b = bank.biases.data[j];
        for i in 0..positions {
            let window = &x.data[i * k..(i + h) * k];
            values.data[j * positions + i] = act.apply(dot(w, window) + b);
        }
    }
    Ok(FeatureMap { values })
}

/// Per-filter maximum over positions and where it was found.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled {
    pub values: Vec<f64>,
    /// Lowest position holding the maximum; gradients route only there.
    pub argmax: Vec<usize>,
}

pub fn max_pool(fm: &FeatureMap) -> Result<Pooled, NnError> {
    let m = &fm.values;
    if m.cols == 0 {
        return Err(NnError::ShapeMismatch("cannot pool an empty feature map".into()));
    }
    let (values, argmax) = (0..m.rows)
        .map(|j| {
            let row = m.row(j);
            let mut best = 0;
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = i;
                }
            }
            (row[best], best)
        })
        .unzip();
    Ok(Pooled { values, argmax })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Inference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutSpec {
    pub keep_prob: f64,
    pub mode: DropoutMode,
}

/// Inverted-dropout mask: each entry is `1 / keep_prob` with probability
/// `keep_prob`, otherwise 0. A keep probability of 1 draws nothing.
pub fn dropout_mask<R: Rng>(m: usize, keep_prob: f64, rng: &mut R) -> Vec<f64> {
    if keep_prob >= 1.0 {
        return vec![1.0; m];
    }
    let scale = 1.0 / keep_prob;
    (0..m)
        .map(|_| if rng.random::<f64>() < keep_prob { scale } else { 0.0 })
        .collect()
}

/// Training mode masks and rescales; inference mode is the identity.
pub fn dropout<R: Rng>(z: &[f64], spec: DropoutSpec, rng: &mut R) -> Vec<f64> {
    match spec.mode {
        DropoutMode::Inference => z.to_vec(),
        DropoutMode::Train => {
            let mask = dropout_mask(z.len(), spec.keep_prob, rng);
            z.iter().zip(&mask).map(|(a, r)| a * r).collect()
        }
    }
}

/// Fully connected output layer feeding the softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSoftmaxLayer {
    /// `m x C`.
    pub weights: Param,
    /// `C`.
    pub biases: Param,
}

impl DenseSoftmaxLayer {
    pub fn zeros(name: &str, inputs: usize, classes: usize) -> Self {
        DenseSoftmaxLayer {
            weights: Param::zeros(format!("{name}.weights"), &[inputs, classes]),
            biases: Param::zeros(format!("{name}.biases"), &[classes]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape[0]
    }

    pub fn classes(&self) -> usize {
        self.weights.shape[1]
    }
}

/// `y = W^T z + b`.
pub fn logits(z: &[f64], layer: &DenseSoftmaxLayer) -> Result<Vec<f64>, NnError> {
    let (m, c) = (layer.inputs(), layer.classes());
    if z.len() != m {
        return Err(NnError::ShapeMismatch(format!("dense layer expects {m} inputs, got {}", z.len())));
    }
    let mut y = layer.biases.data.clone();
    for (i, &zi) in z.iter().enumerate() {
        if zi != 0.0 {
            let row = &layer.weights.data[i * c..(i + 1) * c];
            y.iter_mut().zip(row).for_each(|(acc, w)| *acc += zi * w);
        }
    }
    Ok(y)
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|y| (y - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn dense_softmax(z: &[f64], layer: &DenseSoftmaxLayer) -> Result<Vec<f64>, NnError> {
    Ok(softmax(&logits(z, layer)?))
}

/// `-ln(max(probs[label], PROB_FLOOR))`.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64, NnError> {
    let p = probs.get(label).ok_or_else(|| {
        NnError::InvalidArgument(format!("label {label} out of {} classes", probs.len()))
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Index of the largest entry, lowest index on exact ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
