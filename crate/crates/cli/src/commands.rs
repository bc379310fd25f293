use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use querycat_core::fsutil::write_atomic;
use querycat_core::ingest::{
    category_id_for_class, generate_synthetic_log, parse_click_log, read_labels, write_click_log, write_labels,
    NoisePolicy, SynthMode, SynthSpec,
};
use querycat_core::models::{Classifier, CnnConfig, MlpConfig, ModelSpec, QueryClassifier, TrainConfig};
use querycat_core::nncore::{grad_check, Activation, Algorithm, GradCheckReport, Mode, OptimizerConfig};
use querycat_core::pipeline::{label_events, prepare, PrepareConfig};
use querycat_core::textprep::{load_dataset, read_dataset, read_vocab, write_dataset, write_vocab, Vocabulary};
use querycat_core::Exec;
use querycat_serve::ServiceConfig;

use crate::layered::{load_file, resolve};
use crate::{
    Cli, CliError, Command, EvalArgs, GradcheckArgs, IngestArgs, PredictArgs, PrepareArgs, ServeArgs, SynthArgs,
    TrainArgs,
};

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    let file = load_file(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(a) => synth(resolve(&a, &file, "synth")?),
        Command::Ingest(a) => ingest(resolve(&a, &file, "ingest")?),
        Command::Prepare(a) => prepare_cmd(resolve(&a, &file, "prepare")?),
        Command::Train(a) => train(resolve(&a, &file, "train")?),
        Command::Eval(a) => eval(resolve(&a, &file, "eval")?),
        Command::Predict(a) => predict(resolve(&a, &file, "predict")?),
        Command::Serve(a) => serve(resolve(&a, &file, "serve")?),
        Command::Gradcheck(a) => gradcheck(resolve(&a, &file, "gradcheck")?),
    }
}

fn required(value: Option<PathBuf>, flag: &str) -> Result<PathBuf, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
}

fn id_list(text: &str, what: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("{what} must be comma-separated integers, got {text:?}")))
}

fn synth(a: SynthArgs) -> Result<(), CliError> {
    let out = required(a.log_out, "log-out")?;
    let mut spec = SynthSpec::new(
        a.classes.unwrap_or(8),
        a.queries_per_class.unwrap_or(4000),
        a.clicks_per_query.unwrap_or(10),
        a.noise.unwrap_or(0.02),
        a.pool_size.unwrap_or(1000),
    );
    if a.order_sensitive.unwrap_or(false) {
        spec.mode = SynthMode::OrderSensitive;
    }
    spec.pool_offset = a.pool_offset.unwrap_or(0);
    let log = generate_synthetic_log(&spec, a.seed.unwrap_or(0))?;
    write_atomic(&out, |w| write_click_log(w, &log.events))?;
    let classes: Vec<String> = (0..spec.n_classes).map(|c| category_id_for_class(c).to_string()).collect();
    eprintln!(
        "wrote {} clicks for {} queries (categories {})",
        log.events.len(),
        log.truth.len(),
        classes.join(",")
    );
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<(), CliError> {
    let input = required(a.log_in, "log-in")?;
    let out = required(a.labels_out, "labels-out")?;
    let live_categories = match a.live_categories {
        Some(text) => Some(
            id_list(&text, "--live-categories")?
                .into_iter()
                .map(|c| c as u32)
                .collect::<BTreeSet<u32>>(),
        ),
        None => None,
    };
    let time_range = match (a.start, a.end) {
        (None, None) => None,
        (s, e) => Some((s.unwrap_or(0), e.unwrap_or(u64::MAX))),
    };
    let policy = NoisePolicy {
        drop_bots: !a.keep_bots.unwrap_or(false),
        dedupe_window_seconds: a.dedupe_window.unwrap_or(60),
        live_categories,
        min_clicks_per_query: a.min_clicks.unwrap_or(3),
        time_range,
    };
    let parsed = parse_click_log(BufReader::new(File::open(&input)?), !a.lenient.unwrap_or(false))?;
    let records = label_events(&parsed.events, &policy, Exec::Parallel);
    write_atomic(&out, |w| write_labels(w, &records))?;
    eprintln!(
        "{} events ({} malformed skipped) -> {} labeled queries",
        parsed.events.len(),
        parsed.skipped,
        records.len()
    );
    Ok(())
}

fn prepare_cmd(a: PrepareArgs) -> Result<(), CliError> {
    let input = required(a.labels_in, "labels-in")?;
    let vocab_out = required(a.vocab_out, "vocab-out")?;
    let train_out = required(a.dataset_out, "dataset-out")?;
    let test_out = required(a.test_out, "test-out")?;
    let defaults = PrepareConfig::default();
    let cfg = PrepareConfig {
        max_vocab: a.max_vocab.unwrap_or(defaults.max_vocab),
        seq_len: a.seq_len.unwrap_or(defaults.seq_len),
        train_ratio: a.train_ratio.unwrap_or(defaults.train_ratio),
        seed: a.seed.unwrap_or(defaults.seed),
    };
    let records = read_labels(BufReader::new(File::open(&input)?))?;
    let p = prepare(&records, &cfg)?;
    write_vocab(&vocab_out, &p.vocab)?;
    write_dataset(&train_out, &p.train)?;
    write_dataset(&test_out, &p.test)?;
    eprintln!(
        "vocabulary {} rows, {} train / {} test examples, {} classes",
        p.vocab.table_size(),
        p.train.len(),
        p.test.len(),
        p.train.class_ids.len()
    );
    Ok(())
}

fn parse_activation(s: Option<&str>) -> Result<Activation, CliError> {
    match s.unwrap_or("relu") {
        "relu" => Ok(Activation::Relu),
        "tanh" => Ok(Activation::Tanh),
        other => Err(CliError::Usage(format!("unknown activation {other:?} (relu, tanh)"))),
    }
}

fn train(a: TrainArgs) -> Result<(), CliError> {
    let dataset_in = required(a.dataset_in, "dataset-in")?;
    let vocab_in = required(a.vocab_in, "vocab-in")?;
    let model_out = required(a.model_out, "model-out")?;
    let activation = parse_activation(a.activation.as_deref())?;
    let algorithm = match a.optimizer.as_deref().unwrap_or("adam") {
        "adam" => Algorithm::Adam,
        "sgd" => Algorithm::Sgd,
        other => return Err(CliError::Usage(format!("unknown optimizer {other:?} (adam, sgd)"))),
    };
    let filter_widths = match &a.filter_widths {
        Some(text) => id_list(text, "--filter-widths")?,
        None => CnnConfig::default().filter_widths,
    };

    let (train_set, vocab) = load_dataset(&dataset_in, &vocab_in)?;
    let eval_set = match &a.eval_in {
        Some(p) => {
            let d = read_dataset(p)?;
            d.validate(Some(vocab.table_size()))?;
            Some(d)
        }
        None => None,
    };
    let seq_len = train_set.seq_len;
    if let Some(s) = a.seq_len {
        if s != seq_len {
            return Err(CliError::Data(format!("--seq-len {s} but the dataset was encoded with {seq_len}")));
        }
    }
    let n_classes = train_set.n_classes();
    let embedding_trainable = !a.static_embedding.unwrap_or(false);
    let spec = match a.model.as_deref().unwrap_or("cnn") {
        "cnn" => {
            let d = CnnConfig::default();
            ModelSpec::Cnn(CnnConfig {
                embedding_dim: a.embedding_dim.unwrap_or(d.embedding_dim),
                filter_widths,
                filters_per_width: a.num_filters.unwrap_or(d.filters_per_width),
                keep_prob: a.keep_prob.unwrap_or(d.keep_prob),
                seq_len,
                n_classes,
                activation,
                embedding_trainable,
            })
        }
        "mlp" => {
            let d = MlpConfig::default();
            ModelSpec::Mlp(MlpConfig {
                embedding_dim: a.embedding_dim.unwrap_or(d.embedding_dim),
                hidden_layers: a.hidden_layers.unwrap_or(d.hidden_layers),
                hidden_size: a.hidden_size.unwrap_or(d.hidden_size),
                keep_prob: a.keep_prob.unwrap_or(d.keep_prob),
                seq_len,
                n_classes,
                activation,
                embedding_trainable,
            })
        }
        other => return Err(CliError::Usage(format!("unknown model {other:?} (cnn, mlp)"))),
    };
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        batch_size: a.batch_size.unwrap_or(defaults.batch_size),
        epochs: a.epochs.unwrap_or(defaults.epochs),
        optimizer: OptimizerConfig { algorithm, lr: a.lr.unwrap_or(defaults.optimizer.lr), ..defaults.optimizer },
        seed: a.seed.unwrap_or(0),
        best_on_eval: a.best_on_eval.unwrap_or(false),
        exec: if a.sequential.unwrap_or(false) { Exec::Sequential } else { Exec::Parallel },
        ..defaults
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let model = Classifier::build(&spec, vocab.table_size(), cfg.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut qc = QueryClassifier::new(model, train_set.class_ids.clone(), &vocab)?;
    let curve = qc.model.train(&train_set, eval_set.as_ref(), &cfg, |s| match &s.eval {
        Some(e) => eprintln!(
            "epoch {:>3}  step {:>6}  train loss {:.6} acc {:.6}  eval loss {:.6} acc {:.6}",
            s.epoch, s.step, s.train_loss, s.train_accuracy, e.loss, e.accuracy
        ),
        None => eprintln!(
            "epoch {:>3}  step {:>6}  train loss {:.6} acc {:.6}",
            s.epoch, s.step, s.train_loss, s.train_accuracy
        ),
    })?;
    let version = qc.save(&model_out)?;
    if let Some(path) = &a.metrics_out {
        curve.write(path)?;
    }
    println!("model_version {version}");
    Ok(())
}

fn load_model(
    model_in: Option<PathBuf>,
    vocab_in: Option<PathBuf>,
) -> Result<(QueryClassifier, String, Vocabulary), CliError> {
    let model_in = required(model_in, "model-in")?;
    let vocab = read_vocab(&required(vocab_in, "vocab-in")?)?;
    let (qc, version) = QueryClassifier::load(&model_in, Some(&vocab))?;
    Ok((qc, version, vocab))
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    let dataset_in = required(a.dataset_in, "dataset-in")?;
    let (qc, _, vocab) = load_model(a.model_in, a.vocab_in)?;
    let data = read_dataset(&dataset_in)?;
    data.validate(Some(vocab.table_size()))?;
    if data.class_ids != qc.class_ids {
        return Err(CliError::Data(format!(
            "dataset classes {:?} differ from model classes {:?}",
            data.class_ids, qc.class_ids
        )));
    }
    let report = qc.model.evaluate(&data, Exec::Parallel)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "examples {}", report.n)?;
    writeln!(out, "accuracy {:.6}", report.accuracy)?;
    writeln!(out, "loss {:.6}", report.loss)?;
    writeln!(out, "confusion (rows: true category, columns: predicted)")?;
    let header: Vec<String> = qc.class_ids.iter().map(|c| format!("{c:>8}")).collect();
    writeln!(out, "{:>8}{}", "", header.join(""))?;
    for (c, row) in qc.class_ids.iter().zip(&report.confusion) {
        let cells: Vec<String> = row.iter().map(|n| format!("{n:>8}")).collect();
        writeln!(out, "{c:>8}{}", cells.join(""))?;
    }
    Ok(())
}

fn predict(a: PredictArgs) -> Result<(), CliError> {
    let query = a.query.ok_or_else(|| CliError::Usage("--query is required".into()))?;
    let top_k = a.top_k.unwrap_or(3);
    if top_k == 0 {
        return Err(CliError::Usage("--top-k must be >= 1".into()));
    }
    let (qc, version, vocab) = load_model(a.model_in, a.vocab_in)?;
    let mut predictions = qc.predict(&query, &vocab)?;
    predictions.truncate(top_k);
    let body = serde_json::json!({ "model_version": version, "predictions": predictions });
    println!("{body}");
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let d = ServiceConfig::default();
    let config = ServiceConfig {
        bind: a.bind.unwrap_or(d.bind),
        model_path: required(a.model_in, "model-in")?,
        vocab_path: required(a.vocab_in, "vocab-in")?,
        top_k: a.top_k.unwrap_or(d.top_k),
        max_query_bytes: a.max_query_bytes.unwrap_or(d.max_query_bytes),
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let handle = querycat_serve::start(config).await?;
        eprintln!("serving model {} on http://{}", handle.state.current().version, handle.addr);
        handle.wait().await?;
        Ok(())
    })
}

/// Gradient check of a vocab-20, dim-4, widths {1,2} x 2 filters, 3-class
/// tanh network on a fixed random batch.
pub fn tiny_gradcheck(seed: u64, epsilon: f64) -> Result<GradCheckReport, CliError> {
    let cfg = CnnConfig {
        embedding_dim: 4,
        filter_widths: vec![1, 2],
        filters_per_width: 2,
        keep_prob: 1.0,
        seq_len: 6,
        n_classes: 3,
        activation: Activation::Tanh,
        embedding_trainable: true,
    };
    let net = querycat_core::models::build_cnn(&cfg, 20, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..8 {
        let len = rng.random_range(1..=cfg.seq_len);
        let mut row: Vec<u32> = (0..len).map(|_| rng.random_range(1..20)).collect();
        row.resize(cfg.seq_len, 0);
        ids.push(row);
        labels.push(rng.random_range(0..cfg.n_classes));
    }
    let batch: Vec<&[u32]> = ids.iter().map(Vec::as_slice).collect();
    Ok(grad_check(&net, &batch, &labels, Mode::Inference, epsilon)?)
}

fn gradcheck(a: GradcheckArgs) -> Result<(), CliError> {
    let epsilon = a.epsilon.unwrap_or(1e-4);
    if epsilon <= 0.0 {
        return Err(CliError::Usage("--epsilon must be positive".into()));
    }
    let report = tiny_gradcheck(a.seed.unwrap_or(0), epsilon)?;
    println!(
        "max relative error {:.3e} over {} coordinates ({} skipped)",
        report.max_rel_error, report.checked, report.skipped
    );
    if report.max_rel_error < 1e-4 {
        Ok(())
    } else {
        Err(CliError::Data(format!("gradient check failed: {:.3e} >= 1e-4", report.max_rel_error)))
    }
}
