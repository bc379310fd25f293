//! Synthetic click logs with a known query to category map.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClickEvent, IngestError};

/// L1 category ids handed out to the first eight synthetic classes.
const L1_CATEGORY_IDS: [u32; 8] = [27, 45, 72, 10, 800, 112, 34, 1];

/// 2016-06-28 00:00:00 UTC; clicks fall in the 90 days after it.
const WINDOW_START: u64 = 1_467_072_000;
const WINDOW_SECONDS: u64 = 90 * 86_400;

const ATTEMPTS_PER_QUERY: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthMode {
    /// Every class owns a disjoint slice of the token pool.
    #[default]
    Topical,
    /// Classes share their tokens in pairs and differ only in the order of a
    /// marker bigram placed anywhere among shared filler words.
    OrderSensitive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_classes: usize,
    pub queries_per_class: usize,
    pub clicks_per_query: usize,
    /// Fraction of clicks sent to a uniformly chosen wrong class.
    pub noise_fraction: f64,
    pub vocab_pool_size: usize,
    pub mode: SynthMode,
    /// Rotates which tokens of each pool are frequent. Two logs with
    /// different offsets share classes and words but not their word mix.
    pub pool_offset: usize,
}

impl SynthSpec {
    pub fn new(
        n_classes: usize,
        queries_per_class: usize,
        clicks_per_query: usize,
        noise_fraction: f64,
        vocab_pool_size: usize,
    ) -> Self {
        SynthSpec {
            n_classes,
            queries_per_class,
            clicks_per_query,
            noise_fraction,
            vocab_pool_size,
            mode: SynthMode::Topical,
            pool_offset: 0,
        }
    }

    pub fn order_sensitive(mut self) -> Self {
        self.mode = SynthMode::OrderSensitive;
        self
    }

    fn validate(&self) -> Result<(), IngestError> {
        let fail = |m: String| Err(IngestError::InvalidSpec(m));
        if self.n_classes < 2 {
            return fail(format!("n_classes must be >= 2, got {}", self.n_classes));
        }
        if self.queries_per_class == 0 || self.clicks_per_query == 0 || self.vocab_pool_size == 0 {
            return fail("queries_per_class, clicks_per_query and vocab_pool_size must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return fail(format!("noise_fraction must be in [0, 1), got {}", self.noise_fraction));
        }
        match self.mode {
            SynthMode::Topical if self.vocab_pool_size < self.n_classes => fail(format!(
                "vocab_pool_size {} leaves no tokens for some of {} classes",
                self.vocab_pool_size, self.n_classes
            )),
            SynthMode::OrderSensitive if self.vocab_pool_size < 2 * self.n_classes.div_ceil(2) + 1 => {
                fail("vocab_pool_size too small for marker pairs plus fillers".into())
            }
            _ => Ok(()),
        }
    }
}

/// Category id of synthetic class `class`.
pub fn category_id_for_class(class: usize) -> u32 {
    L1_CATEGORY_IDS
        .get(class)
        .copied()
        .unwrap_or(1000 + class as u32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLog {
    pub events: Vec<ClickEvent>,
    /// Generating category of every normalized query.
    pub truth: BTreeMap<String, u32>,
}

/// Pronounceable, distinct lowercase word for a token index.
fn word(index: usize) -> String {
    const CONS: &[u8] = b"bdfgklmnprstvz";
    const VOWELS: &[u8] = b"aeiou";
    let base = CONS.len() * VOWELS.len();
    let mut digits = vec![index % base];
    let mut rest = index / base;
    while rest > 0 || digits.len() < 2 {
        digits.push(rest % base);
        rest /= base;
    }
    digits
        .iter()
        .rev()
        .flat_map(|&d| [CONS[d / VOWELS.len()] as char, VOWELS[d % VOWELS.len()] as char])
        .collect()
}

/// Skewed draw from a pool of `size` tokens, rotated by `offset`.
fn pool_draw(rng: &mut ChaCha8Rng, size: usize, offset: usize) -> usize {
    let u: f64 = rng.random();
    let j = ((size as f64) * u * u) as usize;
    (j.min(size - 1) + offset) % size
}

fn topical_query(rng: &mut ChaCha8Rng, spec: &SynthSpec, class: usize) -> Vec<String> {
    let pool = spec.vocab_pool_size / spec.n_classes;
    let r: f64 = rng.random();
    let len = if r < 0.15 { 1 } else if r < 0.75 { 2 } else { 3 };
    (0..len)
        .map(|_| word(class * pool + pool_draw(rng, pool, spec.pool_offset)))
        .collect()
}

fn ordered_query(rng: &mut ChaCha8Rng, spec: &SynthSpec, class: usize) -> Vec<String> {
    let markers = 2 * spec.n_classes.div_ceil(2);
    let fillers = spec.vocab_pool_size - markers;
    let pair = class / 2;
    let (a, b) = (word(2 * pair), word(2 * pair + 1));
    let bigram = if class % 2 == 0 { [a, b] } else { [b, a] };
    let r: f64 = rng.random();
    let n_fill = if r < 0.1 { 0 } else if r < 0.4 { 1 } else if r < 0.75 { 2 } else { 3 };
    let mut q: Vec<String> = (0..n_fill)
        .map(|_| word(markers + pool_draw(rng, fillers, spec.pool_offset)))
        .collect();
    let at = rng.random_range(0..=n_fill);
    q.splice(at..at, bigram);
    q
}

/// Raw surface form of a canonical query: occasional capitalization, shouting,
/// trailing punctuation or doubled spaces, all undone by normalization.
fn surface(rng: &mut ChaCha8Rng, canonical: &[String]) -> String {
    let r: f64 = rng.random();
    let sep = if r < 0.05 { "  " } else { " " };
    let mut s = canonical.join(sep);
    let r: f64 = rng.random();
    if r < 0.05 {
        s = s.to_uppercase();
    } else if r < 0.15 {
        s = s
            .split(sep)
            .map(|w| {
                let mut c = w.chars();
                c.next()
                    .map(|f| f.to_uppercase().collect::<String>() + c.as_str())
                    .unwrap_or_default()
            })
            .collect::<Vec<_>>()
            .join(sep);
    }
    if rng.random::<f64>() < 0.05 {
        s.push('!');
    }
    s
}

/// Generates a click log whose dominant categories are known.
///
/// Each class gets `queries_per_class` distinct queries, each receiving
/// `clicks_per_query` clicks from distinct sessions; a `noise_fraction` share
/// of clicks lands on a uniformly random wrong class. Output is sorted by
/// timestamp and fully determined by `(spec, seed)`.
pub fn generate_synthetic_log(spec: &SynthSpec, seed: u64) -> Result<SyntheticLog, IngestError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut truth = BTreeMap::new();
    let mut seen = HashSet::new();
    let mut events = Vec::with_capacity(spec.n_classes * spec.queries_per_class * spec.clicks_per_query);

    for class in 0..spec.n_classes {
        let category = category_id_for_class(class);
        for _ in 0..spec.queries_per_class {
            let mut attempts = 0;
            let canonical = loop {
                let q = match spec.mode {
                    SynthMode::Topical => topical_query(&mut rng, spec, class),
                    SynthMode::OrderSensitive => ordered_query(&mut rng, spec, class),
                };
                if seen.insert(q.join(" ")) {
                    break q;
                }
                attempts += 1;
                if attempts >= ATTEMPTS_PER_QUERY {
                    return Err(IngestError::InvalidSpec(format!(
                        "token pool too small for {} distinct queries in class {class}",
                        spec.queries_per_class
                    )));
                }
            };
            truth.insert(canonical.join(" "), category);
            for _ in 0..spec.clicks_per_query {
                let cat = if rng.random::<f64>() < spec.noise_fraction {
                    let other = rng.random_range(0..spec.n_classes - 1);
                    category_id_for_class(if other >= class { other + 1 } else { other })
                } else {
                    category
                };
                events.push(ClickEvent {
                    session_id: format!("s{:016x}", rng.random::<u64>()),
                    timestamp: WINDOW_START + rng.random_range(0..WINDOW_SECONDS),
                    query_raw: surface(&mut rng, &canonical),
                    ad_id: format!("ad{}", rng.random_range(0..1_000_000u32)),
                    category_id: cat,
                    is_bot: false,
                });
            }
        }
    }
    events.sort_by_key(|e| e.timestamp);
    Ok(SyntheticLog { events, truth })
}
