use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::ClickEvent;
use crate::textprep::normalize;

/// What counts as noise in a click log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoisePolicy {
    pub drop_bots: bool,
    /// Repeated clicks on the same (session, query, ad) within this many
    /// seconds of the last kept one collapse onto it.
    pub dedupe_window_seconds: u64,
    /// Categories that still exist; `None` keeps every category.
    pub live_categories: Option<BTreeSet<u32>>,
    /// Queries with fewer surviving clicks are dropped entirely. 0 acts as 1.
    pub min_clicks_per_query: u64,
    /// Inclusive `[start, end]` timestamp window; `None` keeps everything.
    pub time_range: Option<(u64, u64)>,
}

impl Default for NoisePolicy {
    fn default() -> Self {
        NoisePolicy {
            drop_bots: true,
            dedupe_window_seconds: 60,
            live_categories: None,
            min_clicks_per_query: 3,
            time_range: None,
        }
    }
}

/// Removes noise in a fixed order: time window, bots, redundant repeats,
/// dead categories, then queries without enough clicks (queries that
/// normalize to nothing never have enough). Survivors keep their input order.
/// Applying the filter twice is the same as applying it once.
pub fn filter_noise(events: &[ClickEvent], policy: &NoisePolicy) -> Vec<ClickEvent> {
    let norms: Vec<String> = events.iter().map(|e| normalize(&e.query_raw)).collect();
    let mut keep: Vec<bool> = events
        .iter()
        .map(|e| {
            policy
                .time_range
                .is_none_or(|(lo, hi)| e.timestamp >= lo && e.timestamp <= hi)
                && !(policy.drop_bots && e.is_bot)
        })
        .collect();

    // Timestamp order, input order on equal timestamps.
    let mut order: Vec<usize> = (0..events.len()).filter(|&i| keep[i]).collect();
    order.sort_by_key(|&i| events[i].timestamp);
    let mut last_kept: HashMap<(&str, &str, &str), u64> = HashMap::new();
    for i in order {
        let e = &events[i];
        let key = (e.session_id.as_str(), norms[i].as_str(), e.ad_id.as_str());
        match last_kept.get(&key) {
            Some(&t) if e.timestamp - t <= policy.dedupe_window_seconds => keep[i] = false,
            _ => {
                last_kept.insert(key, e.timestamp);
            }
        }
    }

    if let Some(live) = &policy.live_categories {
        for (k, e) in keep.iter_mut().zip(events) {
            *k = *k && live.contains(&e.category_id);
        }
    }

    let mut totals: HashMap<&str, u64> = HashMap::new();
    for (i, _) in events.iter().enumerate().filter(|&(i, _)| keep[i]) {
        *totals.entry(norms[i].as_str()).or_insert(0) += 1;
    }
    let min = policy.min_clicks_per_query.max(1);
    events
        .iter()
        .enumerate()
        .filter(|&(i, _)| keep[i] && !norms[i].is_empty() && totals[norms[i].as_str()] >= min)
        .map(|(_, e)| e.clone())
        .collect()
}
