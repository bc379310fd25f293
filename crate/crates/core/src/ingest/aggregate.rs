use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use super::ClickEvent;
use crate::textprep::normalize;
use crate::Exec;

/// Collaborative clicks of one normalized query, per category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub query_norm: String,
    pub counts: BTreeMap<u32, u64>,
}

impl CategoryCounts {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

type CountTable = BTreeMap<String, BTreeMap<u32, u64>>;

fn into_counts(table: CountTable) -> Vec<CategoryCounts> {
    table
        .into_iter()
        .map(|(query_norm, counts)| CategoryCounts { query_norm, counts })
        .collect()
}

fn count_into(table: &mut CountTable, query: String, category: u32) {
    *table.entry(query).or_default().entry(category).or_insert(0) += 1;
}

/// Exact per-(query, category) click counts, ascending by normalized query.
/// Events whose query normalizes to nothing are ignored.
pub fn aggregate(events: &[ClickEvent]) -> Vec<CategoryCounts> {
    let mut table = CountTable::new();
    for e in events {
        let q = normalize(&e.query_raw);
        if !q.is_empty() {
            count_into(&mut table, q, e.category_id);
        }
    }
    into_counts(table)
}

/// Sums two aggregations key by key.
pub fn merge(a: Vec<CategoryCounts>, b: Vec<CategoryCounts>) -> Vec<CategoryCounts> {
    let mut table = CountTable::new();
    for cc in a.into_iter().chain(b) {
        let slot = table.entry(cc.query_norm).or_default();
        for (cat, n) in cc.counts {
            *slot.entry(cat).or_insert(0) += n;
        }
    }
    into_counts(table)
}

fn shard_of(query: &str, shards: usize) -> usize {
    let mut h = DefaultHasher::new();
    query.hash(&mut h);
    (h.finish() % shards as u64) as usize
}

/// [`aggregate`] with events partitioned by query hash into `shards`
/// independent tables that are counted in parallel and merged. The result
/// does not depend on the shard count.
pub fn aggregate_sharded(events: &[ClickEvent], shards: usize, exec: Exec) -> Vec<CategoryCounts> {
    let shards = shards.max(1);
    let norms = exec.map(events, |e| normalize(&e.query_raw));
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); shards];
    for (i, q) in norms.iter().enumerate() {
        if !q.is_empty() {
            buckets[shard_of(q, shards)].push(i);
        }
    }
    let tables = exec.map(&buckets, |idx| {
        let mut table = CountTable::new();
        for &i in idx {
            count_into(&mut table, norms[i].clone(), events[i].category_id);
        }
        into_counts(table)
    });
    tables.into_iter().fold(Vec::new(), merge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ev(query: &str, cat: u32) -> ClickEvent {
        ClickEvent {
            session_id: "s".into(),
            timestamp: 0,
            query_raw: query.into(),
            ad_id: "a".into(),
            category_id: cat,
            is_bot: false,
        }
    }

    /// Nested-loop recount: for every distinct (query, category) pair, scan
    /// the whole log.
    fn brute_force(events: &[ClickEvent]) -> Vec<CategoryCounts> {
        let mut queries: Vec<String> = events
            .iter()
            .map(|e| normalize(&e.query_raw))
            .filter(|q| !q.is_empty())
            .collect();
        queries.sort();
        queries.dedup();
        let mut cats: Vec<u32> = events.iter().map(|e| e.category_id).collect();
        cats.sort();
        cats.dedup();
        queries
            .into_iter()
            .map(|q| {
                let mut counts = BTreeMap::new();
                for &c in &cats {
                    let n = events
                        .iter()
                        .filter(|e| normalize(&e.query_raw) == q && e.category_id == c)
                        .count() as u64;
                    if n > 0 {
                        counts.insert(c, n);
                    }
                }
                CategoryCounts { query_norm: q, counts }
            })
            .collect()
    }

    fn random_log(seed: u64, n: usize) -> Vec<ClickEvent> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let words = ["free", "couch", "Cash", "jobs", "civic", "2007", "!"];
        (0..n)
            .map(|_| {
                let len = rng.random_range(1..=3);
                let q: Vec<&str> = (0..len).map(|_| words[rng.random_range(0..words.len())]).collect();
                ev(&q.join(" "), rng.random_range(0..5))
            })
            .collect()
    }

    #[test]
    fn direct_count() {
        let evs = [ev("cash jobs", 45), ev("Cash Jobs", 45), ev("cash jobs", 10)];
        let out = aggregate(&evs);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].query_norm, "cash jobs");
        assert_eq!(out[0].counts, BTreeMap::from([(10, 1), (45, 2)]));
        assert!(aggregate(&[]).is_empty());
    }

    #[test]
    fn thousand_events_match_nested_loops() {
        let evs = random_log(3, 1000);
        assert_eq!(aggregate(&evs), brute_force(&evs));
    }

    #[test]
    fn sharding_matches_single_table() {
        let evs = random_log(11, 2000);
        let single = aggregate(&evs);
        for shards in [1, 2, 7, 64] {
            assert_eq!(aggregate_sharded(&evs, shards, Exec::Parallel), single);
            assert_eq!(aggregate_sharded(&evs, shards, Exec::Sequential), single);
        }
    }

    proptest! {
        #[test]
        fn order_invariant(seed in any::<u64>(), n in 0usize..300) {
            let evs = random_log(seed, n);
            let mut shuffled = evs.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
            prop_assert_eq!(aggregate(&shuffled), aggregate(&evs));
        }

        #[test]
        fn merge_of_parts_is_whole(seed in any::<u64>(), n in 0usize..300, cut in 0usize..300) {
            let evs = random_log(seed, n);
            let cut = cut.min(n);
            let (a, b) = evs.split_at(cut);
            prop_assert_eq!(merge(aggregate(a), aggregate(b)), aggregate(&evs));
        }
    }
}
