use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::common::mix;
use super::{MetricsCurve, MetricsRow, ModelError, Split, TrainConfig};
use crate::nncore::{argmax, batch_loss, cross_entropy, Mode, Network, Optimizer};
use crate::textprep::Dataset;
use crate::Exec;

/// Per-epoch aggregate handed to the progress callback.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub step: u64,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub eval: Option<EvalReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    pub loss: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
}

const EVAL_CHUNK: usize = 4096;

fn check_compatible<N: Network>(net: &N, data: &Dataset, what: &str) -> Result<(), ModelError> {
    if data.seq_len != net.seq_len() || data.n_classes() != net.n_classes() {
        return Err(ModelError::ConfigMismatch(format!(
            "{what} has seq_len {} and {} classes, model expects {} and {}",
            data.seq_len,
            data.n_classes(),
            net.seq_len(),
            net.n_classes()
        )));
    }
    Ok(())
}

/// Inference-mode accuracy, mean loss and confusion matrix. Ties in the
/// predicted distribution resolve to the lowest class index.
pub fn evaluate<N: Network>(net: &N, data: &Dataset, exec: Exec) -> Result<EvalReport, ModelError> {
    check_compatible(net, data, "dataset")?;
    if data.is_empty() {
        return Err(ModelError::InvalidArgument("cannot evaluate an empty dataset".into()));
    }
    let c = net.n_classes();
    let chunks = exec.map_chunks(&data.examples, EVAL_CHUNK, |chunk| {
        let batch: Vec<&[u32]> = chunk.iter().map(|e| e.ids.as_slice()).collect();
        let out = net.forward_batch(&batch, Mode::Inference, false, Exec::Sequential)?;
        let mut loss = 0.0;
        let mut preds = Vec::with_capacity(chunk.len());
        for (p, e) in out.probs.iter().zip(chunk) {
            loss += cross_entropy(p, e.label)?;
            preds.push(argmax(p));
        }
        Ok::<_, ModelError>((loss, preds))
    });
    let mut confusion = vec![vec![0u64; c]; c];
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut examples = data.examples.iter();
    for chunk in chunks {
        let (l, preds) = chunk?;
        loss += l;
        for p in preds {
            let truth = examples.next().expect("one prediction per example").label;
            confusion[truth][p] += 1;
            correct += (truth == p) as usize;
        }
    }
    let n = data.len();
    Ok(EvalReport { n, accuracy: correct as f64 / n as f64, loss: loss / n as f64, confusion })
}

/// Minibatch training. Each epoch reshuffles the training set, visits every
/// example once (the last batch may be short) and then evaluates on
/// `eval_set` if given. The network is left at its final-epoch parameters
/// unless `best_on_eval` is set.
pub fn train<N: Network>(
    net: &mut N,
    train_set: &Dataset,
    eval_set: Option<&Dataset>,
    cfg: &TrainConfig,
    mut progress: impl FnMut(&EpochSummary),
) -> Result<MetricsCurve, ModelError> {
    cfg.validate()?;
    check_compatible(net, train_set, "training set")?;
    if train_set.is_empty() {
        return Err(ModelError::InvalidArgument("empty training set".into()));
    }
    if let Some(eval) = eval_set {
        check_compatible(net, eval, "eval set")?;
        if eval.class_ids != train_set.class_ids || eval.seq_len != train_set.seq_len {
            return Err(ModelError::ConfigMismatch("train and eval sets disagree on classes or seq_len".into()));
        }
    }

    let mut opt = Optimizer::new(cfg.optimizer);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut curve = MetricsCurve::default();
    let mut step = 0u64;
    let mut best: Option<(f64, N)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            step += 1;
            let batch: Vec<&[u32]> = chunk.iter().map(|&i| train_set.examples[i].ids.as_slice()).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| train_set.examples[i].label).collect();
            let out = net.forward_batch(&batch, Mode::Train { seed: mix(cfg.seed, step) }, true, cfg.exec)?;
            let loss = batch_loss(&out.probs, &labels)?;
            let hits = out.probs.iter().zip(&labels).filter(|(p, &l)| argmax(p) == l).count();
            let grads = net.backward_batch(&out, &labels, cfg.exec)?;
            opt.step(&mut net.params_mut(), &grads, cfg.exec)?;
            loss_sum += loss * chunk.len() as f64;
            correct += hits;
            curve.rows.push(MetricsRow {
                step,
                epoch,
                split: Split::Train,
                loss,
                accuracy: hits as f64 / chunk.len() as f64,
            });
        }
        let eval = match eval_set {
            Some(data) => {
                let report = evaluate(net, data, cfg.exec)?;
                curve.rows.push(MetricsRow {
                    step,
                    epoch,
                    split: Split::Eval,
                    loss: report.loss,
                    accuracy: report.accuracy,
                });
                if cfg.best_on_eval && best.as_ref().is_none_or(|(acc, _)| report.accuracy > *acc) {
                    best = Some((report.accuracy, net.clone()));
                }
                Some(report)
            }
            None => None,
        };
        let n = train_set.len() as f64;
        progress(&EpochSummary {
            epoch,
            step,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            eval,
        });
    }
    if let Some((_, snapshot)) = best {
        *net = snapshot;
    }
    Ok(curve)
}
