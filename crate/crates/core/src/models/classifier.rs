use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    build_cnn, build_mlp, evaluate, train, CnnConfig, CnnNet, EpochSummary, EvalReport, MetricsCurve, MlpConfig,
    MlpNet, ModelError, TrainConfig,
};
use crate::fsutil::write_atomic;
use crate::nncore::{decode_checkpoint, encode_checkpoint, model_version, Mode, Network, NnError, Param};
use crate::textprep::{encode, normalize, Dataset, Vocabulary};
use crate::Exec;

/// Architecture description stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "config", rename_all = "lowercase")]
pub enum ModelSpec {
    Cnn(CnnConfig),
    Mlp(MlpConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Cnn(CnnNet),
    Mlp(MlpNet),
}

macro_rules! dispatch {
    ($self:expr, $net:ident => $body:expr) => {
        match $self {
            Classifier::Cnn($net) => $body,
            Classifier::Mlp($net) => $body,
        }
    };
}

impl Classifier {
    pub fn build(spec: &ModelSpec, vocab_rows: usize, seed: u64) -> Result<Self, ModelError> {
        Ok(match spec {
            ModelSpec::Cnn(c) => Classifier::Cnn(build_cnn(c, vocab_rows, seed)?),
            ModelSpec::Mlp(c) => Classifier::Mlp(build_mlp(c, vocab_rows, seed)?),
        })
    }

    pub fn from_params(spec: &ModelSpec, params: Vec<Param>) -> Result<Self, ModelError> {
        Ok(match spec {
            ModelSpec::Cnn(c) => Classifier::Cnn(CnnNet::from_params(c, params)?),
            ModelSpec::Mlp(c) => Classifier::Mlp(MlpNet::from_params(c, params)?),
        })
    }

    pub fn spec(&self) -> ModelSpec {
        match self {
            Classifier::Cnn(n) => ModelSpec::Cnn(n.config.clone()),
            Classifier::Mlp(n) => ModelSpec::Mlp(n.config.clone()),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        dispatch!(self, n => n.params())
    }

    pub fn seq_len(&self) -> usize {
        dispatch!(self, n => n.seq_len())
    }

    pub fn n_classes(&self) -> usize {
        dispatch!(self, n => n.n_classes())
    }

    pub fn vocab_rows(&self) -> usize {
        self.params()[0].shape[0]
    }

    /// Inference-mode class distributions.
    pub fn probabilities(&self, batch: &[&[u32]], exec: Exec) -> Result<Vec<Vec<f64>>, NnError> {
        dispatch!(self, n => Ok(n.forward_batch(batch, Mode::Inference, false, exec)?.probs))
    }

    pub fn train(
        &mut self,
        train_set: &Dataset,
        eval_set: Option<&Dataset>,
        cfg: &TrainConfig,
        progress: impl FnMut(&EpochSummary),
    ) -> Result<MetricsCurve, ModelError> {
        dispatch!(self, n => train(n, train_set, eval_set, cfg, progress))
    }

    pub fn evaluate(&self, data: &Dataset, exec: Exec) -> Result<EvalReport, ModelError> {
        dispatch!(self, n => evaluate(n, data, exec))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub category_id: u32,
    pub probability: f64,
}

/// A network together with the class mapping and the vocabulary it was
/// trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryClassifier {
    pub model: Classifier,
    pub class_ids: Vec<u32>,
    pub vocab_hash: String,
}

impl QueryClassifier {
    pub fn new(model: Classifier, class_ids: Vec<u32>, vocab: &Vocabulary) -> Result<Self, ModelError> {
        if class_ids.len() != model.n_classes() {
            return Err(ModelError::ConfigMismatch(format!(
                "{} class ids for a {}-class model",
                class_ids.len(),
                model.n_classes()
            )));
        }
        if vocab.table_size() > model.vocab_rows() {
            return Err(ModelError::ConfigMismatch(format!(
                "vocabulary has {} rows, embedding only {}",
                vocab.table_size(),
                model.vocab_rows()
            )));
        }
        Ok(QueryClassifier { model, class_ids, vocab_hash: vocab.content_hash() })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, ModelError> {
        let spec = serde_json::to_value(self.model.spec()).map_err(|e| ModelError::InvalidArgument(e.to_string()))?;
        Ok(encode_checkpoint(spec, &self.vocab_hash, &self.class_ids, &self.model.params())?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let (header, params) = decode_checkpoint(bytes)?;
        let spec: ModelSpec = serde_json::from_value(header.model)
            .map_err(|e| NnError::FormatVersionMismatch(format!("unknown model description: {e}")))?;
        let model = Classifier::from_params(&spec, params)?;
        if header.class_ids.len() != model.n_classes() {
            return Err(NnError::FormatVersionMismatch("class ids do not match the output layer".into()).into());
        }
        Ok(QueryClassifier { model, class_ids: header.class_ids, vocab_hash: header.vocab_hash })
    }

    /// Writes the checkpoint atomically and returns its model version.
    pub fn save(&self, path: &Path) -> Result<String, ModelError> {
        let bytes = self.to_bytes()?;
        write_atomic(path, |w| w.write_all(&bytes))?;
        Ok(model_version(&bytes))
    }

    /// Loads a checkpoint, checking it against `vocab` when one is given.
    /// Returns the classifier and its model version.
    pub fn load(path: &Path, vocab: Option<&Vocabulary>) -> Result<(Self, String), ModelError> {
        let bytes = std::fs::read(path).map_err(NnError::Io)?;
        let qc = Self::from_bytes(&bytes)?;
        if let Some(v) = vocab {
            qc.check_vocab(v)?;
        }
        Ok((qc, model_version(&bytes)))
    }

    pub fn check_vocab(&self, vocab: &Vocabulary) -> Result<(), ModelError> {
        let actual = vocab.content_hash();
        if actual != self.vocab_hash {
            return Err(NnError::VocabHashMismatch { expected: self.vocab_hash.clone(), actual }.into());
        }
        Ok(())
    }

    /// Full class distribution for a raw query, most probable first, ties by
    /// ascending category id.
    pub fn predict(&self, query_raw: &str, vocab: &Vocabulary) -> Result<Vec<Prediction>, ModelError> {
        Ok(self.predict_many(&[query_raw], vocab, Exec::Sequential)?.remove(0))
    }

    pub fn predict_many<S: AsRef<str>>(
        &self,
        queries: &[S],
        vocab: &Vocabulary,
        exec: Exec,
    ) -> Result<Vec<Vec<Prediction>>, ModelError> {
        self.check_vocab(vocab)?;
        let encoded = queries
            .iter()
            .map(|q| {
                let norm = normalize(q.as_ref());
                if norm.is_empty() {
                    Err(ModelError::EmptyQuery)
                } else {
                    Ok(encode(&norm, vocab, self.model.seq_len()))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        if encoded.is_empty() {
            return Ok(Vec::new());
        }
        let batch: Vec<&[u32]> = encoded.iter().map(Vec::as_slice).collect();
        let probs = self.model.probabilities(&batch, exec)?;
        Ok(probs.into_iter().map(|p| self.rank(&p)).collect())
    }

    fn rank(&self, probs: &[f64]) -> Vec<Prediction> {
        let mut out: Vec<Prediction> = self
            .class_ids
            .iter()
            .zip(probs)
            .map(|(&category_id, &probability)| Prediction { category_id, probability })
            .collect();
        out.sort_by(|a, b| b.probability.total_cmp(&a.probability).then(a.category_id.cmp(&b.category_id)));
        out
    }
}
