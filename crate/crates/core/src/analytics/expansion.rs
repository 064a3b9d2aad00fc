//! Hashtag statistics over the corpus: co-occurrence query expansion and
//! bursty-hashtag ranking.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::AnalyticsError;
use crate::ingest::TweetRecord;
use crate::store::{ColumnClass, Granularity, Store, Table, Value};

use super::bursts::{BurstInterval, EPSILON};

fn top_by<T: PartialOrd + Copy>(mut rows: Vec<(String, T)>, k: usize) -> Vec<(String, T)> {
    rows.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite").then_with(|| a.0.cmp(&b.0)));
    rows.truncate(k);
    rows
}

/// For each non-seed hashtag, the number of distinct tweets carrying it
/// together with at least one seed; keeps counts `>= min_support` and
/// returns the top `n`, ties broken lexicographically.
pub fn cooccurrence_expand_records<'a>(
    records: impl IntoIterator<Item = &'a TweetRecord>,
    seeds: &BTreeSet<String>,
    n: usize,
    min_support: usize,
) -> Result<Table, AnalyticsError> {
    if seeds.is_empty() || n == 0 || min_support == 0 {
        return Err(AnalyticsError::InvalidArgument("seeds must be non-empty and n, min_support at least 1".into()));
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in records {
        if !r.hashtags.iter().any(|h| seeds.contains(h)) {
            continue;
        }
        let tags: BTreeSet<&String> = r.hashtags.iter().filter(|h| !seeds.contains(*h)).collect();
        for h in tags {
            *counts.entry(h.clone()).or_default() += 1;
        }
    }
    let rows = counts.into_iter().filter(|(_, c)| *c >= min_support).collect();
    let mut t = Table::with_schema(
        "cooccurrence_expansion",
        &[("hashtag", ColumnClass::Categorical), ("cooccurrence_count", ColumnClass::Continuous)],
    )
    .expect("static schema");
    for (h, c) in top_by(rows, n) {
        t.push(vec![Value::str(h), Value::Int(c as i64)]).expect("schema");
    }
    Ok(t)
}

/// [`cooccurrence_expand_records`] over the store's counted records,
/// optionally restricted to `start <= created_at < end`.
pub fn cooccurrence_expand(
    store: &Store,
    seeds: &BTreeSet<String>,
    n: usize,
    min_support: usize,
    interval: Option<(i64, i64)>,
) -> Result<Table, AnalyticsError> {
    let recs = store.stat_records().filter(|r| interval.is_none_or(|(a, b)| r.created_at >= a && r.created_at < b));
    cooccurrence_expand_records(recs, seeds, n, min_support)
}

/// Merges overlapping or touching intervals into disjoint sorted spans.
pub fn merge_intervals(intervals: &[BurstInterval]) -> Vec<(i64, i64)> {
    let mut spans: Vec<(i64, i64)> = intervals.iter().map(|i| (i.start, i.end)).collect();
    spans.sort();
    let mut out: Vec<(i64, i64)> = Vec::new();
    for (s, e) in spans {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

/// Ranks hashtags by how much more often they occur inside the intervals
/// than across the corpus:
///
/// `ratio(h) = (inside(h) / inside_buckets) / (global(h) / corpus_buckets + EPSILON)`
///
/// where `corpus_buckets` is the number of buckets spanned by the corpus at
/// `granularity`. Only hashtags occurring inside the intervals are ranked.
pub fn bursty_hashtags_records<'a>(
    records: impl IntoIterator<Item = &'a TweetRecord> + Clone,
    intervals: &[BurstInterval],
    k: usize,
    granularity: Granularity,
) -> Result<Table, AnalyticsError> {
    if intervals.is_empty() {
        return Err(AnalyticsError::EmptyIntervalSet);
    }
    if k == 0 {
        return Err(AnalyticsError::InvalidArgument("k must be at least 1".into()));
    }
    let spans = merge_intervals(intervals);
    let step = granularity.seconds();
    let inside_secs: i64 = spans.iter().map(|(s, e)| e - s).sum();
    let inside_buckets = (inside_secs as f64 / step as f64).max(1.0);

    let mut lo = i64::MAX;
    let mut hi = i64::MIN;
    let mut global: BTreeMap<&str, usize> = BTreeMap::new();
    let mut inside: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        lo = lo.min(r.created_at);
        hi = hi.max(r.created_at);
        let hit = spans.iter().any(|&(s, e)| r.created_at >= s && r.created_at < e);
        for h in &r.hashtags {
            *global.entry(h).or_default() += 1;
            if hit {
                *inside.entry(h).or_default() += 1;
            }
        }
    }
    let corpus_buckets =
        if lo > hi { 1.0 } else { ((granularity.bucket(hi) - granularity.bucket(lo)) / step + 1) as f64 };
    let rows = inside
        .into_iter()
        .map(|(h, c)| {
            let background = global[h] as f64 / corpus_buckets;
            (h.to_string(), (c as f64 / inside_buckets) / (background + EPSILON))
        })
        .collect();
    let mut t = Table::with_schema(
        "bursty_hashtags",
        &[("hashtag", ColumnClass::Categorical), ("burst_ratio", ColumnClass::Continuous)],
    )
    .expect("static schema");
    for (h, r) in top_by(rows, k) {
        t.push(vec![Value::str(h), Value::Real(r)]).expect("schema");
    }
    Ok(t)
}

pub fn bursty_hashtags(
    store: &Store,
    intervals: &[BurstInterval],
    k: usize,
    granularity: Granularity,
) -> Result<Table, AnalyticsError> {
    let recs: Vec<&TweetRecord> = store.stat_records().collect();
    bursty_hashtags_records(recs.iter().copied(), intervals, k, granularity)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, t: i64, tags: &[&str]) -> TweetRecord {
        TweetRecord {
            tweet_id: id.into(),
            author_id: "a".into(),
            created_at: t,
            text: String::new(),
            hashtags: tags.iter().map(|s| s.to_string()).collect(),
            mentions: vec![],
            reply_to: None,
            retweet_of: None,
        }
    }

    fn seeds(s: &[&str]) -> BTreeSet<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    fn rows(t: &Table) -> Vec<(String, Value)> {
        t.rows.iter().map(|r| (r[0].key_string(), r[1].clone())).collect()
    }

    #[test]
    fn expansion_fixture() {
        let recs =
            [rec("t1", 0, &["hiv", "prep"]), rec("t2", 0, &["hiv", "prep"]), rec("t3", 0, &["prep", "condomless"])];
        let t = cooccurrence_expand_records(&recs, &seeds(&["hiv"]), 1, 1).unwrap();
        assert_eq!(rows(&t), vec![("prep".to_string(), Value::Int(2))]);
        let all = cooccurrence_expand_records(&recs, &seeds(&["hiv", "prep", "condomless"]), 5, 1).unwrap();
        assert!(all.is_empty());
        let many = cooccurrence_expand_records(&recs, &seeds(&["prep"]), 50, 1).unwrap();
        assert_eq!(many.len(), 2);
        assert!(cooccurrence_expand_records(&recs, &seeds(&[]), 1, 1).is_err());
    }

    #[test]
    fn exclusive_tag_has_max_ratio_and_uniform_is_near_one() {
        let mut recs = Vec::new();
        for h in 0..100 {
            recs.push(rec(&format!("u{h}"), h * 3600, &["uniform"]));
        }
        recs.push(rec("x", 50 * 3600 + 10, &["only"]));
        let iv = [BurstInterval { start: 50 * 3600, end: 51 * 3600, peak: 4.0 }];
        let t = bursty_hashtags_records(&recs, &iv, 10, Granularity::Hour).unwrap();
        let r = rows(&t);
        assert_eq!(r[0].0, "only");
        let uniform = r.iter().find(|x| x.0 == "uniform").unwrap().1.as_f64().unwrap();
        assert!((uniform - 1.0).abs() < 1e-6);
        assert!(matches!(
            bursty_hashtags_records(&recs, &[], 10, Granularity::Hour),
            Err(AnalyticsError::EmptyIntervalSet)
        ));
    }

    #[test]
    fn overlapping_intervals_merge() {
        let iv = [
            BurstInterval { start: 0, end: 10, peak: 3.0 },
            BurstInterval { start: 5, end: 20, peak: 3.0 },
            BurstInterval { start: 30, end: 40, peak: 3.0 },
        ];
        assert_eq!(merge_intervals(&iv), vec![(0, 20), (30, 40)]);
    }
}
