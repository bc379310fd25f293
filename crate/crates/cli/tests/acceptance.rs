//! End-to-end acceptance criteria. Runs as a plain binary (no libtest
//! harness) and prints one `[PASS]`/`[FAIL]` line per criterion.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use querycat_core::ingest::{
    aggregate, aggregate_sharded, generate_synthetic_log, label, ClickEvent, NoisePolicy, SynthSpec,
};
use querycat_core::models::{
    build_cnn, build_mlp, evaluate, train, Classifier, CnnConfig, MlpConfig, ModelSpec, QueryClassifier, TrainConfig,
};
use querycat_core::nncore::{
    compare_gradients, conv_forward, cross_entropy, dropout, softmax, Activation, ConvFilterBank, DropoutMode,
    DropoutSpec, Matrix,
};
use querycat_core::pipeline::{label_events, prepare, PrepareConfig, Prepared};
use querycat_core::textprep::{encode, normalize, read_vocab, Vocabulary};
use querycat_core::Exec;
use querycat_serve::{serve_state, AppState, PredictResponse, ServiceConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn querycat(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_querycat")).args(args).output().expect("run querycat")
}

fn run_ok(args: &[&str]) -> Result<String, String> {
    let out = querycat(args);
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!(
            "querycat {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).lines().last().unwrap_or("")
        ))
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Synthetic dataset straight through the library pipeline.
fn synthetic(spec: &SynthSpec, seed: u64) -> Prepared {
    let log = generate_synthetic_log(spec, seed).unwrap();
    let records = label_events(&log.events, &NoisePolicy::default(), Exec::Parallel);
    prepare(&records, &PrepareConfig { seed, ..Default::default() }).unwrap()
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness
// ---------------------------------------------------------------------------

fn c1_gradients() -> Outcome {
    let start = Instant::now();
    let report = querycat_cli::tiny_gradcheck(0, 1e-4).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(report.max_rel_error < 1e-4, format!("max relative error {:.3e}", report.max_rel_error))?;
    check(elapsed < Duration::from_secs(10), format!("took {elapsed:?}"))?;
    check(report.checked > 0, "no coordinates checked")?;

    let mut corrupted = report.analytic.clone();
    let dense_weights = corrupted.tensors.len() - 2;
    corrupted.tensors[dense_weights].iter_mut().for_each(|g| *g += 0.1);
    let (bad, _) = compare_gradients(&corrupted, &report.numeric).map_err(|e| e.to_string())?;
    check(bad > 1e-2, format!("negative control not detected ({bad:.3e})"))?;

    let out = querycat(&["gradcheck"]);
    check(out.status.success(), "querycat gradcheck did not exit 0")?;
    Ok(format!(
        "max rel err {:.2e} over {} coords in {:.2?}; corrupted dense grad gives {:.2e}",
        report.max_rel_error, report.checked, elapsed, bad
    ))
}

// ---------------------------------------------------------------------------
// 2. Encoding fidelity
// ---------------------------------------------------------------------------

fn c2_encoding() -> Outcome {
    let vocab = Vocabulary::from_pairs([("giving", 1235), ("away", 1643), ("free", 1245)]).map_err(|e| e.to_string())?;
    let ids = encode("giving away free free", &vocab, 9);
    check(ids == [1235, 1643, 1245, 1245, 0, 0, 0, 0, 0], format!("got {ids:?}"))?;

    let words = ["free", "couch", "civic", "2007", "cash", "jobs", "air"];
    let built = Vocabulary::build(&["free couch", "civic 2007", "cash jobs free"], 100).map_err(|e| e.to_string())?;
    let mut runner = TestRunner::new(PropConfig { cases: 10_000, failure_persistence: None, ..PropConfig::default() });
    let strategy = (
        prop::collection::vec(prop::sample::select(words.to_vec()), 0..15),
        "[ a-zA-Z!?.,]{0,30}",
        1usize..20,
    );
    runner
        .run(&strategy, |(picked, noise, seq_len)| {
            let query = normalize(&format!("{} {}", picked.join(" "), noise));
            let ids = encode(&query, &built, seq_len);
            prop_assert_eq!(ids.len(), seq_len);
            let tokens: Vec<&str> = query.split(' ').filter(|t| !t.is_empty()).collect();
            for (t, &id) in tokens.iter().zip(&ids) {
                prop_assert_eq!(id, built.id(t));
            }
            for (i, a) in tokens.iter().take(seq_len).enumerate() {
                for (j, b) in tokens.iter().take(seq_len).enumerate() {
                    if a == b {
                        prop_assert_eq!(ids[i], ids[j]);
                    }
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("running example reproduced; 10000 random queries keep length and shared ids".into())
}

// ---------------------------------------------------------------------------
// 3. Labeling oracle
// ---------------------------------------------------------------------------

fn random_log(rng: &mut ChaCha8Rng) -> Vec<ClickEvent> {
    const BASE: [&str; 12] = [
        "cash jobs", "Cash  Jobs!", "2007 civic", "2007 Civic", "free couch", "air conditioner",
        "b&q", "B Q", "tv", "TV!!", "honda", "honda civic",
    ];
    let n = rng.random_range(0..=10_000);
    let n_cats = rng.random_range(1..=4);
    (0..n)
        .map(|i| ClickEvent {
            session_id: format!("s{}", rng.random_range(0..50)),
            timestamp: i as u64,
            query_raw: BASE[rng.random_range(0..BASE.len())].to_string(),
            ad_id: format!("a{}", rng.random_range(0..20)),
            category_id: [1, 10, 27, 45][rng.random_range(0..n_cats)],
            is_bot: false,
        })
        .collect()
}

fn c3_labeling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut ties = 0;
    let mut total_records = 0;
    for log_no in 0..100 {
        let events = random_log(&mut rng);
        let norms: Vec<String> = events.iter().map(|e| normalize(&e.query_raw)).collect();
        let mut queries: Vec<&String> = norms.iter().collect();
        queries.sort();
        queries.dedup();
        let mut cats: Vec<u32> = events.iter().map(|e| e.category_id).collect();
        cats.sort();
        cats.dedup();

        let aggregated = aggregate(&events);
        check(aggregated == aggregate_sharded(&events, 7, Exec::Parallel), "sharded aggregation differs")?;
        check(aggregated.len() == queries.len(), format!("log {log_no}: query count"))?;
        for (counts, q) in aggregated.iter().zip(&queries) {
            check(&counts.query_norm == *q, format!("log {log_no}: order"))?;
            // Quadratic recount: one full pass over the log per (query, category).
            let mut brute: BTreeMap<u32, u64> = BTreeMap::new();
            for &c in &cats {
                let n = events.iter().zip(&norms).filter(|(e, n)| *n == *q && e.category_id == c).count() as u64;
                if n > 0 {
                    brute.insert(c, n);
                }
            }
            check(counts.counts == brute, format!("log {log_no} {q:?}: counts"))?;

            let record = label(counts);
            let total: u64 = brute.values().sum();
            let best = *brute.values().max().unwrap();
            let expected_dom = *brute.iter().find(|(_, &n)| n == best).unwrap().0;
            if brute.values().filter(|&&n| n == best).count() > 1 {
                ties += 1;
            }
            check(record.dominant_category == expected_dom, format!("log {log_no} {q:?}: dominant"))?;
            check(record.total_clicks == total, "total clicks")?;
            let sum: f64 = record.rates.values().sum();
            check((sum - 1.0).abs() <= 1e-9, format!("rates sum to {sum}"))?;
            for (c, n) in &brute {
                check(record.rates[c] == *n as f64 / total as f64, "rate value")?;
            }
            let mut ranked: Vec<(u32, u64)> = brute.into_iter().collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            let top3: Vec<u32> = ranked.iter().take(3).map(|x| x.0).collect();
            check(record.top3.iter().map(|x| x.0).collect::<Vec<_>>() == top3, "top3 order")?;
            total_records += 1;
        }
    }
    check(ties > 0, "no tie cases were exercised")?;
    Ok(format!("100 logs, {total_records} query records, {ties} ties, all equal to brute-force recount"))
}

// ---------------------------------------------------------------------------
// 4 and 9. Full-scale synthetic run through the CLI
// ---------------------------------------------------------------------------

struct FullRun {
    elapsed: Duration,
    eval_stdout: String,
    metrics_csv: String,
    error: Option<String>,
}

fn full_run(dir: &Path) -> FullRun {
    let f = |n: &str| dir.join(n);
    let start = Instant::now();
    let steps: Vec<Vec<String>> = vec![
        vec!["synth".into(), "--seed".into(), "7".into(), "--log-out".into(), p(&f("clicks.jsonl")).into()],
        vec![
            "ingest".into(), "--log-in".into(), p(&f("clicks.jsonl")).into(),
            "--labels-out".into(), p(&f("labels.tsv")).into(),
        ],
        vec![
            "prepare".into(), "--labels-in".into(), p(&f("labels.tsv")).into(),
            "--vocab-out".into(), p(&f("vocab.tsv")).into(),
            "--dataset-out".into(), p(&f("train.tsv")).into(),
            "--test-out".into(), p(&f("test.tsv")).into(), "--seed".into(), "7".into(),
        ],
        vec![
            "train".into(), "--dataset-in".into(), p(&f("train.tsv")).into(),
            "--eval-in".into(), p(&f("test.tsv")).into(),
            "--vocab-in".into(), p(&f("vocab.tsv")).into(),
            "--model-out".into(), p(&f("model.qcat")).into(),
            "--metrics-out".into(), p(&f("metrics.csv")).into(), "--seed".into(), "7".into(),
        ],
    ];
    for args in &steps {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        if let Err(e) = run_ok(&args) {
            return FullRun { elapsed: start.elapsed(), eval_stdout: String::new(), metrics_csv: String::new(), error: Some(e) };
        }
    }
    let eval = run_ok(&[
        "eval", "--model-in", p(&f("model.qcat")), "--vocab-in", p(&f("vocab.tsv")),
        "--dataset-in", p(&f("test.tsv")),
    ]);
    let elapsed = start.elapsed();
    match eval {
        Ok(eval_stdout) => FullRun {
            elapsed,
            eval_stdout,
            metrics_csv: std::fs::read_to_string(f("metrics.csv")).unwrap_or_default(),
            error: None,
        },
        Err(e) => FullRun { elapsed, eval_stdout: String::new(), metrics_csv: String::new(), error: Some(e) },
    }
}

fn c4_accuracy(run: &FullRun, dir: &Path) -> Outcome {
    if let Some(e) = &run.error {
        return Err(e.clone());
    }
    let test = std::fs::read_to_string(dir.join("test.tsv")).map_err(|e| e.to_string())?;
    let train = std::fs::read_to_string(dir.join("train.tsv")).map_err(|e| e.to_string())?;
    let (n_train, n_test) = (train.lines().count() - 1, test.lines().count() - 1);
    let total = n_train + n_test;
    check((31_000..=33_000).contains(&total), format!("{total} labeled queries, expected about 32000"))?;
    check(n_train.abs_diff(n_test) <= 1, format!("split {n_train}/{n_test} is not 50/50"))?;
    let accuracy: f64 = run
        .eval_stdout
        .lines()
        .find_map(|l| l.strip_prefix("accuracy "))
        .and_then(|v| v.trim().parse().ok())
        .ok_or("eval printed no accuracy")?;
    check(accuracy >= 0.95, format!("test accuracy {accuracy:.4} < 0.95"))?;
    check(run.elapsed <= Duration::from_secs(600), format!("took {:.1?} > 10 min", run.elapsed))?;
    Ok(format!(
        "{total} queries ({n_train}/{n_test}), test accuracy {accuracy:.4}, synth..eval in {:.1?}",
        run.elapsed
    ))
}

struct TrainRow {
    epoch: usize,
    loss: f64,
    accuracy: f64,
}

fn train_rows(csv: &str) -> Vec<TrainRow> {
    csv.lines()
        .skip(1)
        .filter_map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f.get(2) == Some(&"train")).then(|| TrainRow {
                epoch: f[1].parse().unwrap(),
                loss: f[3].parse().unwrap(),
                accuracy: f[4].parse().unwrap(),
            })
        })
        .collect()
}

fn block_means(values: &[f64], width: usize) -> Vec<f64> {
    values.chunks_exact(width).map(|c| c.iter().sum::<f64>() / width as f64).collect()
}

fn c9_convergence(run: &FullRun) -> Outcome {
    if let Some(e) = &run.error {
        return Err(e.clone());
    }
    let rows = train_rows(&run.metrics_csv);
    check(rows.len() >= 100, "metrics too short")?;
    let losses: Vec<f64> = rows.iter().map(|r| r.loss).collect();
    let initial = block_means(&losses[..50], 50)[0];
    let from = rows.iter().position(|r| r.epoch >= 5).ok_or("fewer than 5 epochs")?;
    let late = block_means(&losses[from..], 50);
    let increases: Vec<(usize, f64, f64)> = late
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0])
        .map(|(i, w)| (i + 1, w[0], w[1]))
        .collect();
    let final_loss = *late.last().unwrap();
    let accs: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
    let final_acc = block_means(&accs[accs.len() - 50..], 50)[0];
    let summary = format!(
        "50-step mean loss {initial:.4} -> {final_loss:.6} ({:.3}% of initial), final train accuracy {final_acc:.4}, {} of {} windows increase",
        100.0 * final_loss / initial,
        increases.len(),
        late.len().saturating_sub(1)
    );
    check(final_loss < 0.05 * initial, format!("{summary}; final loss not below 5% of initial"))?;
    check(final_acc >= 0.99, format!("{summary}; final training accuracy below 0.99"))?;
    if let Some(&(i, a, b)) = increases.iter().max_by(|x, y| (x.2 - x.1).total_cmp(&(y.2 - y.1))) {
        return Err(format!("{summary}; largest rise at window {i}: {a:.6} -> {b:.6}"));
    }
    Ok(summary)
}

// ---------------------------------------------------------------------------
// 5. Baseline ordering on the order-sensitive variant
// ---------------------------------------------------------------------------

fn c5_baselines() -> Outcome {
    let data = synthetic(&SynthSpec::new(8, 500, 10, 0.02, 200).order_sensitive(), 11);
    let rows = data.vocab.table_size();
    let cfg = TrainConfig { epochs: 20, seed: 5, ..Default::default() };
    let mut cnn = build_cnn(&CnnConfig::default(), rows, 5).map_err(|e| e.to_string())?;
    let mut mlp = build_mlp(&MlpConfig { hidden_layers: 2, ..Default::default() }, rows, 5).map_err(|e| e.to_string())?;
    train(&mut cnn, &data.train, None, &cfg, |_| {}).map_err(|e| e.to_string())?;
    train(&mut mlp, &data.train, None, &cfg, |_| {}).map_err(|e| e.to_string())?;
    let a_cnn = evaluate(&cnn, &data.test, Exec::Parallel).map_err(|e| e.to_string())?.accuracy;
    let a_mlp = evaluate(&mlp, &data.test, Exec::Parallel).map_err(|e| e.to_string())?.accuracy;
    let msg = format!(
        "order-sensitive set {}/{}: CNN {a_cnn:.4} vs MLP(2x200) {a_mlp:.4} after {} epochs",
        data.train.len(),
        data.test.len(),
        cfg.epochs
    );
    check(a_cnn >= a_mlp, msg.clone())?;
    Ok(msg)
}

// ---------------------------------------------------------------------------
// 6. Numeric layer properties
// ---------------------------------------------------------------------------

fn c6_layers() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_sum = 0.0f64;
    let mut worst_shift = 0.0f64;
    for _ in 0..10_000 {
        let c = rng.random_range(1..=16);
        let logits: Vec<f64> = (0..c).map(|_| rng.random_range(-50.0..50.0)).collect();
        let shift = rng.random_range(-100.0..100.0);
        let p = softmax(&logits);
        let q = softmax(&logits.iter().map(|y| y + shift).collect::<Vec<_>>());
        worst_sum = worst_sum.max((p.iter().sum::<f64>() - 1.0).abs());
        worst_shift = p.iter().zip(&q).fold(worst_shift, |m, (a, b)| m.max((a - b).abs()));
    }
    check(worst_sum <= 1e-12, format!("softmax sum off by {worst_sum:e}"))?;
    check(worst_shift <= 1e-12, format!("shift changed probabilities by {worst_shift:e}"))?;

    let ce = cross_entropy(&[0.125; 8], 5).map_err(|e| e.to_string())?;
    check((ce - 8f64.ln()).abs() <= 1e-9, format!("uniform cross-entropy {ce}"))?;

    for n in 1..=20 {
        for h in 1..=n {
            let x = Matrix::zeros(n, 3);
            let fm = conv_forward(&x, &ConvFilterBank::zeros(h, 2, 3), Activation::Relu).map_err(|e| e.to_string())?;
            check(fm.values.cols == n - h + 1, format!("n={n} h={h}: width {}", fm.values.cols))?;
        }
    }

    let z: Vec<f64> = (1..=8).map(|i| i as f64 * 0.75).collect();
    let spec = DropoutSpec { keep_prob: 0.5, mode: DropoutMode::Train };
    let mut sums = vec![0.0; z.len()];
    for _ in 0..20_000 {
        for (s, v) in sums.iter_mut().zip(dropout(&z, spec, &mut rng)) {
            *s += v;
        }
    }
    let worst_rel = sums
        .iter()
        .zip(&z)
        .map(|(s, z)| (s / 20_000.0 - z).abs() / z)
        .fold(0.0f64, f64::max);
    check(worst_rel <= 0.02, format!("dropout mean off by {:.2}%", 100.0 * worst_rel))?;
    Ok(format!(
        "softmax sum err {worst_sum:.1e}, shift err {worst_shift:.1e}, CE(uniform 8) = {ce:.9}, dropout mean within {:.2}%",
        100.0 * worst_rel
    ))
}

// ---------------------------------------------------------------------------
// 7. Determinism
// ---------------------------------------------------------------------------

fn c7_determinism(base: &Path) -> Outcome {
    let f = |n: &str| base.join(n);
    run_ok(&[
        "synth", "--queries-per-class", "300", "--pool-size", "300", "--seed", "3", "--log-out", p(&f("clicks.jsonl")),
    ])?;
    run_ok(&["ingest", "--log-in", p(&f("clicks.jsonl")), "--labels-out", p(&f("labels.tsv"))])?;
    run_ok(&[
        "prepare", "--labels-in", p(&f("labels.tsv")), "--vocab-out", p(&f("vocab.tsv")),
        "--dataset-out", p(&f("train.tsv")), "--test-out", p(&f("test.tsv")),
    ])?;
    let train_once = |tag: &str, extra: &[&str]| -> Result<(Vec<u8>, Vec<u8>), String> {
        let (model, metrics) = (f(&format!("model_{tag}.qcat")), f(&format!("metrics_{tag}.csv")));
        let (train_set, test_set, vocab) = (f("train.tsv"), f("test.tsv"), f("vocab.tsv"));
        let mut args = vec![
            "train", "--dataset-in", p(&train_set), "--eval-in", p(&test_set),
            "--vocab-in", p(&vocab), "--model-out", p(&model), "--metrics-out", p(&metrics),
            "--epochs", "3", "--seed", "17",
        ];
        args.extend_from_slice(extra);
        run_ok(&args)?;
        Ok((std::fs::read(&model).unwrap(), std::fs::read(&metrics).unwrap()))
    };
    let a = train_once("a", &[])?;
    let b = train_once("b", &[])?;
    let seq = train_once("seq", &["--sequential"])?;
    check(a.1 == b.1, "metrics CSVs differ between identical runs")?;
    check(a.0 == b.0, "checkpoints differ between identical runs")?;
    check(a == seq, "sequential run differs from parallel run")?;

    let data = synthetic(&SynthSpec::new(4, 100, 5, 0.0, 80), 1);
    let mut net = build_cnn(&CnnConfig { n_classes: 4, ..Default::default() }, data.vocab.table_size(), 2)
        .map_err(|e| e.to_string())?;
    let before = net.clone();
    let mut cfg = TrainConfig { epochs: 2, ..Default::default() };
    cfg.optimizer.lr = 0.0;
    train(&mut net, &data.train, Some(&data.test), &cfg, |_| {}).map_err(|e| e.to_string())?;
    check(net == before, "lr = 0 changed parameters")?;
    Ok(format!(
        "two seeded runs (and a sequential run) gave identical {}-byte metrics and {}-byte checkpoints; lr=0 is a no-op",
        a.1.len(),
        a.0.len()
    ))
}

// ---------------------------------------------------------------------------
// 8. Serialization and serving consistency
// ---------------------------------------------------------------------------

fn probe_queries(vocab: &Vocabulary, n: usize, seed: u64) -> Vec<String> {
    let words: Vec<&str> = vocab.entries().map(|(w, _)| w).filter(|w| !w.starts_with('<')).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(1..=5);
            (0..len)
                .map(|_| {
                    if rng.random_bool(0.1) {
                        "qqxqq".to_string()
                    } else {
                        words[rng.random_range(0..words.len())].to_string()
                    }
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

fn c8_serving(base: &Path) -> Outcome {
    let data = synthetic(&SynthSpec::new(8, 400, 10, 0.02, 300), 21);
    let vocab_path = base.join("vocab.tsv");
    querycat_core::textprep::write_vocab(&vocab_path, &data.vocab).map_err(|e| e.to_string())?;
    let vocab = read_vocab(&vocab_path).map_err(|e| e.to_string())?;

    let mut models = Vec::new();
    for seed in [1u64, 2] {
        let mut net = Classifier::build(&ModelSpec::Cnn(CnnConfig::default()), vocab.table_size(), seed)
            .map_err(|e| e.to_string())?;
        net.train(&data.train, None, &TrainConfig { epochs: 3, seed, ..Default::default() }, |_| {})
            .map_err(|e| e.to_string())?;
        models.push(QueryClassifier::new(net, data.train.class_ids.clone(), &vocab).map_err(|e| e.to_string())?);
    }
    let paths: Vec<PathBuf> = (0..2).map(|i| base.join(format!("m{i}.qcat"))).collect();
    let versions: Vec<String> = models
        .iter()
        .zip(&paths)
        .map(|(m, path)| m.save(path).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;

    let probes = probe_queries(&vocab, 10_000, 8);
    let (loaded, _) = QueryClassifier::load(&paths[0], Some(&vocab)).map_err(|e| e.to_string())?;
    let before = models[0].predict_many(&probes, &vocab, Exec::Parallel).map_err(|e| e.to_string())?;
    let after = loaded.predict_many(&probes, &vocab, Exec::Parallel).map_err(|e| e.to_string())?;
    let flips = before.iter().zip(&after).filter(|(a, b)| a[0].category_id != b[0].category_id).count();
    check(flips == 0, format!("{flips} of 10000 top-1 predictions changed after reload"))?;

    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let served = runtime.block_on(async {
        let config = ServiceConfig { model_path: paths[0].clone(), vocab_path, ..Default::default() };
        let state = std::sync::Arc::new(AppState::load(&config).map_err(|e| e.to_string())?);
        let handle = serve_state(state, "127.0.0.1:0").await.map_err(|e| e.to_string())?;
        let base_url = format!("http://{}", handle.addr);
        let client = reqwest::Client::new();
        let libs: Vec<(String, QueryClassifier)> = paths
            .iter()
            .map(|p| QueryClassifier::load(p, Some(&vocab)).map(|(q, v)| (v, q)))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;

        for q in probes.iter().take(200) {
            let resp: PredictResponse = client
                .post(format!("{base_url}/predict"))
                .json(&serde_json::json!({"query": q, "top_k": 8}))
                .send()
                .await
                .map_err(|e| e.to_string())?
                .json()
                .await
                .map_err(|e| e.to_string())?;
            let expected = libs[0].1.predict(q, &vocab).map_err(|e| e.to_string())?;
            if resp.predictions != expected || resp.model_version != libs[0].0 {
                return Err(format!("service and library disagree on {q:?}"));
            }
        }

        let reloader = {
            let (client, base_url, paths) = (client.clone(), base_url.clone(), paths.clone());
            tokio::spawn(async move {
                for i in 1..=30 {
                    let r = client
                        .post(format!("{base_url}/reload"))
                        .json(&serde_json::json!({"model_path": paths[i % 2]}))
                        .send()
                        .await;
                    if !matches!(r, Ok(ref r) if r.status() == 200) {
                        return Err("reload failed".to_string());
                    }
                }
                Ok(())
            })
        };
        let mut tasks = Vec::new();
        for i in 0..64 {
            let (client, base_url) = (client.clone(), base_url.clone());
            let q = probes[i].clone();
            tasks.push(tokio::spawn(async move {
                let mut got = Vec::new();
                for _ in 0..4 {
                    let resp = client
                        .post(format!("{base_url}/predict"))
                        .json(&serde_json::json!({"query": q, "top_k": 8}))
                        .send()
                        .await
                        .map_err(|e| e.to_string())?;
                    if resp.status() != 200 {
                        return Err(format!("status {}", resp.status()));
                    }
                    got.push((q.clone(), resp.json::<PredictResponse>().await.map_err(|e| e.to_string())?));
                }
                Ok::<_, String>(got)
            }));
        }
        reloader.await.map_err(|e| e.to_string())??;
        let mut seen = BTreeMap::new();
        for t in tasks {
            for (q, resp) in t.await.map_err(|e| e.to_string())?? {
                let (_, lib) = libs
                    .iter()
                    .find(|(v, _)| *v == resp.model_version)
                    .ok_or("response carries an unknown model version")?;
                if resp.predictions != lib.predict(&q, &vocab).map_err(|e| e.to_string())? {
                    return Err(format!("response for {q:?} mixes model versions"));
                }
                *seen.entry(resp.model_version).or_insert(0) += 1;
            }
        }
        handle.shutdown().await.map_err(|e| e.to_string())?;
        Ok(seen)
    })?;
    Ok(format!(
        "0/10000 top-1 flips after reload; 200 responses equal library output; 256 concurrent responses across versions {:?} ({} and {})",
        served.values().collect::<Vec<_>>(),
        versions[0],
        versions[1]
    ))
}

// ---------------------------------------------------------------------------

fn main() {
    let workdir = tempfile::tempdir().expect("tempdir");
    let sub = |name: &str| {
        let d = workdir.path().join(name);
        std::fs::create_dir_all(&d).unwrap();
        d
    };
    let (full_dir, det_dir, serve_dir) = (sub("full"), sub("determinism"), sub("serve"));
    let mut full: Option<FullRun> = None;

    type Criterion<'a> = (&'a str, Box<dyn FnMut() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("1 gradient correctness", Box::new(c1_gradients)),
        ("2 encoding fidelity", Box::new(c2_encoding)),
        ("3 labeling oracle", Box::new(c3_labeling)),
        ("4 synthetic end-to-end accuracy", Box::new(|| {
            let run = full.get_or_insert_with(|| full_run(&full_dir));
            c4_accuracy(run, &full_dir)
        })),
        ("5 CNN vs MLP on order-sensitive data", Box::new(c5_baselines)),
        ("6 numeric layer properties", Box::new(c6_layers)),
        ("7 determinism", Box::new(|| c7_determinism(&det_dir))),
        ("8 serialization and serving", Box::new(|| c8_serving(&serve_dir))),
    ];
    let mut failed = 0;
    let mut report = |name: &str, outcome: Outcome| match outcome {
        Ok(detail) => println!("[PASS] {name}: {detail}"),
        Err(detail) => {
            failed += 1;
            println!("[FAIL] {name}: {detail}");
        }
    };
    for (name, mut f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(&mut f)).unwrap_or_else(|_| Err("panicked".into()));
        report(name, outcome);
    }
    let run = full.get_or_insert_with(|| full_run(&full_dir));
    report("9 convergence shape", c9_convergence(run));
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
