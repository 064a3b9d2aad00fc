//! The in-memory multi-model data layer.
//!
//! Base tables (all populated by ingestion):
//!
//! | table           | columns                                                         |
//! |-----------------|-----------------------------------------------------------------|
//! | `tweets`        | tweet_id, author_id, created_at, text, reply_to, retweet_of, is_retweet |
//! | `authors`       | author_id, tweet_count                                          |
//! | `hashtag_use`   | tweet_id, author_id, hashtag, created_at, is_retweet            |
//! | `mention_edges` | tweet_id, src, dst, created_at                                  |
//! | `reply_edges`   | tweet_id, src, dst, created_at                                  |
//!
//! `reply_edges` links a reply's author to the author of the replied-to
//! tweet when that tweet is already in the store (or in the same batch).
//!
//! Materialized views are recomputed from scratch on every refresh and
//! swapped in together; a failing view leaves the previous state untouched.

pub mod graph;
pub mod table;
pub mod text;
pub mod timeseries;
mod transform;
mod views;

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use graph::{graph_neighborhood, Direction, Edge, Node, Properties, PropertyGraph};
pub use table::{Column, ColumnClass, Table, Value};
pub use text::{InvertedIndex, SearchHit, SearchQuery};
pub use timeseries::{Granularity, TimeSeries};
pub use transform::{build_graph_from_relation, build_graph_from_tables, EdgeRule, GraphMappingSpec, NodeRule};
pub use views::{group_count, MaterializedViewDef, ViewSource};

use crate::dataset::Dataset;
use crate::error::StoreError;
use crate::ingest::TweetRecord;
use crate::xindex::{build_time_hierarchy, RecordRef, TimeHierarchyIndex};

pub const TWEETS: &str = "tweets";
pub const AUTHORS: &str = "authors";
pub const HASHTAG_USE: &str = "hashtag_use";
pub const MENTION_EDGES: &str = "mention_edges";
pub const REPLY_EDGES: &str = "reply_edges";

/// Tables covered by the store's time-hierarchy index.
pub const TEMPORAL_TABLES: [&str; 4] = [TWEETS, HASHTAG_USE, MENTION_EDGES, REPLY_EDGES];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewReport {
    pub view_id: String,
    pub size: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefreshReport {
    pub views: Vec<ViewReport>,
    pub duration: Duration,
    pub generation: u64,
}

#[derive(Debug, Clone)]
pub struct Store {
    records: Vec<TweetRecord>,
    by_id: HashMap<String, usize>,
    tables: BTreeMap<String, Table>,
    text: InvertedIndex,
    count_retweets: bool,
    generation: u64,
    views: Vec<MaterializedViewDef>,
    materialized: BTreeMap<String, Arc<Dataset>>,
    time_index: Arc<TimeHierarchyIndex>,
    index_generation: u64,
}

impl Default for Store {
    fn default() -> Self {
        Self::new()
    }
}

fn base_tables() -> BTreeMap<String, Table> {
    use ColumnClass::*;
    let edge_schema = [("tweet_id", Identifier), ("src", Identifier), ("dst", Identifier), ("created_at", Temporal)];
    let tables = [
        Table::with_schema(
            TWEETS,
            &[
                ("tweet_id", Identifier),
                ("author_id", Identifier),
                ("created_at", Temporal),
                ("text", Text),
                ("reply_to", Identifier),
                ("retweet_of", Identifier),
                ("is_retweet", Categorical),
            ],
        ),
        Table::with_schema(AUTHORS, &[("author_id", Identifier), ("tweet_count", Continuous)]),
        Table::with_schema(
            HASHTAG_USE,
            &[
                ("tweet_id", Identifier),
                ("author_id", Identifier),
                ("hashtag", Categorical),
                ("created_at", Temporal),
                ("is_retweet", Categorical),
            ],
        ),
        Table::with_schema(MENTION_EDGES, &edge_schema),
        Table::with_schema(REPLY_EDGES, &edge_schema),
    ];
    tables
        .into_iter()
        .map(|t| {
            let t = t.expect("static schema");
            (t.name.clone(), t)
        })
        .collect()
}

fn opt(v: &Option<String>) -> Value {
    v.as_ref().map_or(Value::Null, |s| Value::Str(s.clone()))
}

impl Store {
    pub fn new() -> Self {
        Self {
            records: Vec::new(),
            by_id: HashMap::new(),
            tables: base_tables(),
            text: InvertedIndex::new(),
            count_retweets: true,
            generation: 0,
            views: Vec::new(),
            materialized: BTreeMap::new(),
            time_index: Arc::new(TimeHierarchyIndex::default()),
            index_generation: 0,
        }
    }

    /// Bumped on every base-data mutation.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn records(&self) -> &[TweetRecord] {
        &self.records
    }

    pub fn record(&self, tweet_id: &str) -> Option<&TweetRecord> {
        self.by_id.get(tweet_id).map(|&i| &self.records[i])
    }

    pub fn record_ordinal(&self, tweet_id: &str) -> Option<usize> {
        self.by_id.get(tweet_id).copied()
    }

    pub fn contains_tweet(&self, tweet_id: &str) -> bool {
        self.by_id.contains_key(tweet_id)
    }

    pub fn count_retweets(&self) -> bool {
        self.count_retweets
    }

    /// Whether retweets contribute to hashtag statistics.
    pub fn set_count_retweets(&mut self, on: bool) {
        if on != self.count_retweets {
            self.count_retweets = on;
            self.generation += 1;
        }
    }

    /// Records that count toward hashtag statistics.
    pub fn stat_records(&self) -> impl Iterator<Item = &TweetRecord> + '_ {
        let all = self.count_retweets;
        self.records.iter().filter(move |r| all || !r.is_retweet())
    }

    pub fn text_index(&self) -> &InvertedIndex {
        &self.text
    }

    /// Base table or relational view by name.
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.get(name).or_else(|| self.materialized.get(name).and_then(|d| d.as_table()))
    }

    pub fn table_names(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }

    /// Scans a table with the retweet toggle applied to `hashtag_use`.
    pub fn scan(&self, name: &str) -> Result<Cow<'_, Table>, StoreError> {
        let t = self.table(name).ok_or_else(|| StoreError::UnknownTable(name.to_string()))?;
        if name == HASHTAG_USE && !self.count_retweets {
            let col = t.col("is_retweet")?;
            return Ok(Cow::Owned(t.filtered(|r| r[col] != Value::Bool(true))));
        }
        Ok(Cow::Borrowed(t))
    }

    /// Inserts a batch of records into every base table and the text index.
    /// The batch is validated first; on error nothing is inserted.
    pub fn insert_records(&mut self, batch: Vec<TweetRecord>) -> Result<(), StoreError> {
        let mut seen = BTreeSet::new();
        for r in &batch {
            if self.by_id.contains_key(&r.tweet_id) || !seen.insert(r.tweet_id.as_str()) {
                return Err(StoreError::DuplicateId(format!("tweet {}", r.tweet_id)));
            }
            if r.created_at < 0 {
                return Err(StoreError::SchemaViolation(format!("tweet {} has negative created_at", r.tweet_id)));
            }
        }
        let first_new = self.records.len();
        for r in batch {
            self.by_id.insert(r.tweet_id.clone(), self.records.len());
            self.records.push(r);
        }
        let mut tables = std::mem::take(&mut self.tables);
        for i in first_new..self.records.len() {
            let r = &self.records[i];
            let push = |tables: &mut BTreeMap<String, Table>, name: &str, row: Vec<Value>| {
                tables.get_mut(name).expect("base table").push(row).expect("row matches base schema")
            };
            push(
                &mut tables,
                TWEETS,
                vec![
                    Value::str(&r.tweet_id),
                    Value::str(&r.author_id),
                    Value::Int(r.created_at),
                    Value::str(&r.text),
                    opt(&r.reply_to),
                    opt(&r.retweet_of),
                    Value::Bool(r.is_retweet()),
                ],
            );
            for h in &r.hashtags {
                push(
                    &mut tables,
                    HASHTAG_USE,
                    vec![
                        Value::str(&r.tweet_id),
                        Value::str(&r.author_id),
                        Value::str(h),
                        Value::Int(r.created_at),
                        Value::Bool(r.is_retweet()),
                    ],
                );
            }
            for m in &r.mentions {
                push(
                    &mut tables,
                    MENTION_EDGES,
                    vec![Value::str(&r.tweet_id), Value::str(&r.author_id), Value::str(m), Value::Int(r.created_at)],
                );
            }
            if let Some(target) = r.reply_to.as_ref().and_then(|id| self.by_id.get(id)) {
                let dst = &self.records[*target].author_id;
                push(
                    &mut tables,
                    REPLY_EDGES,
                    vec![Value::str(&r.tweet_id), Value::str(&r.author_id), Value::str(dst), Value::Int(r.created_at)],
                );
            }
            self.text.add_document(&r.tweet_id, &r.text, &r.hashtags);
        }
        let mut counts: BTreeMap<&str, i64> = BTreeMap::new();
        for r in &self.records {
            *counts.entry(&r.author_id).or_default() += 1;
        }
        let authors = tables.get_mut(AUTHORS).expect("base table");
        authors.rows = counts.into_iter().map(|(a, n)| vec![Value::str(a), Value::Int(n)]).collect();
        self.tables = tables;
        self.generation += 1;
        Ok(())
    }

    pub fn views(&self) -> &[MaterializedViewDef] {
        &self.views
    }

    pub fn view(&self, view_id: &str) -> Option<Arc<Dataset>> {
        self.materialized.get(view_id).cloned()
    }

    /// Registers a view and materializes it immediately.
    pub fn register_view(&mut self, def: MaterializedViewDef) -> Result<String, StoreError> {
        if self.views.iter().any(|v| v.view_id == def.view_id) {
            return Err(StoreError::DuplicateViewId(def.view_id));
        }
        if self.tables.contains_key(&def.view_id) {
            return Err(StoreError::InvalidViewDef(format!("view id {} shadows a base table", def.view_id)));
        }
        def.validate()?;
        let data = def.source.compute(self)?;
        let id = def.view_id.clone();
        self.materialized.insert(id.clone(), Arc::new(data));
        self.views.push(def);
        Ok(id)
    }

    /// Recomputes every view from the base tables and rebuilds the time
    /// index. All results are swapped in at the end.
    pub fn refresh_views(&mut self) -> Result<RefreshReport, StoreError> {
        let started = Instant::now();
        let mut fresh = BTreeMap::new();
        let mut report = Vec::new();
        for def in &self.views {
            let data = def
                .source
                .compute(self)
                .map_err(|e| StoreError::RefreshFailed { view_id: def.view_id.clone(), message: e.to_string() })?;
            report.push(ViewReport {
                view_id: def.view_id.clone(),
                size: data.size_summary().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            });
            fresh.insert(def.view_id.clone(), Arc::new(data));
        }
        let index = self.build_time_index();
        self.materialized = fresh;
        self.time_index = Arc::new(index);
        self.index_generation = self.generation;
        Ok(RefreshReport { views: report, duration: started.elapsed(), generation: self.generation })
    }

    fn build_time_index(&self) -> TimeHierarchyIndex {
        let mut entries = Vec::new();
        for name in TEMPORAL_TABLES {
            let t = &self.tables[name];
            let col = t.col("created_at").expect("temporal base table");
            let tref: Arc<str> = Arc::from(name);
            for (row, r) in t.rows.iter().enumerate() {
                if let Some(ts) = r[col].as_i64() {
                    entries.push((RecordRef::new(tref.clone(), row), ts));
                }
            }
        }
        build_time_hierarchy(entries)
    }

    /// The time-hierarchy index over all temporal base tables.
    pub fn time_index(&self) -> &Arc<TimeHierarchyIndex> {
        &self.time_index
    }

    /// True when base data changed after the last refresh.
    pub fn index_is_stale(&self) -> bool {
        self.index_generation != self.generation
    }

    /// Hourly (or coarser) count of kept tweets, optionally restricted to
    /// tweets carrying `hashtag`. Only non-empty buckets appear.
    pub fn tweet_counts(&self, granularity: Granularity, hashtag: Option<&str>) -> TimeSeries {
        let name = hashtag.map_or("total_tweets".to_string(), |h| format!("tag:{h}"));
        let ts = self.records.iter().filter(|r| match hashtag {
            None => true,
            Some(h) => (self.count_retweets || !r.is_retweet()) && r.has_tag(h),
        });
        TimeSeries::from_timestamps(name, granularity, ts.map(|r| r.created_at))
    }

    /// Time span of the corpus as `(min, max)` created_at.
    pub fn time_span(&self) -> Option<(i64, i64)> {
        let lo = self.records.iter().map(|r| r.created_at).min()?;
        let hi = self.records.iter().map(|r| r.created_at).max()?;
        Some((lo, hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, author: &str, t: i64, tags: &[&str]) -> TweetRecord {
        TweetRecord {
            tweet_id: id.into(),
            author_id: author.into(),
            created_at: t,
            text: format!("post {id}"),
            hashtags: tags.iter().map(|s| s.to_string()).collect(),
            mentions: vec![],
            reply_to: None,
            retweet_of: None,
        }
    }

    #[test]
    fn insert_is_atomic_on_duplicates() {
        let mut s = Store::new();
        s.insert_records(vec![rec("t1", "a", 0, &[])]).unwrap();
        let err = s.insert_records(vec![rec("t2", "a", 0, &[]), rec("t1", "b", 0, &[])]);
        assert!(err.is_err());
        assert_eq!(s.records().len(), 1);
        assert_eq!(s.table(TWEETS).unwrap().len(), 1);
    }

    #[test]
    fn reply_edges_resolve_authors() {
        let mut s = Store::new();
        let mut r2 = rec("t2", "b", 10, &[]);
        r2.reply_to = Some("t1".into());
        s.insert_records(vec![rec("t1", "a", 0, &[]), r2]).unwrap();
        let re = s.table(REPLY_EDGES).unwrap();
        assert_eq!(re.rows, vec![vec![Value::str("t2"), Value::str("b"), Value::str("a"), Value::Int(10)]]);
    }

    #[test]
    fn retweet_toggle_filters_hashtag_use() {
        let mut s = Store::new();
        let mut rt = rec("t2", "b", 10, &["hiv"]);
        rt.retweet_of = Some("t1".into());
        s.insert_records(vec![rec("t1", "a", 0, &["hiv"]), rt]).unwrap();
        assert_eq!(s.scan(HASHTAG_USE).unwrap().len(), 2);
        s.set_count_retweets(false);
        assert_eq!(s.scan(HASHTAG_USE).unwrap().len(), 1);
        assert_eq!(s.stat_records().count(), 1);
    }

    #[test]
    fn authors_sum_to_records() {
        let mut s = Store::new();
        s.insert_records(vec![rec("t1", "a", 0, &[]), rec("t2", "a", 5, &[]), rec("t3", "b", 9, &[])]).unwrap();
        let total: i64 = s.table(AUTHORS).unwrap().rows.iter().map(|r| r[1].as_i64().unwrap()).sum();
        assert_eq!(total, 3);
    }

    #[test]
    fn staleness_tracks_refresh() {
        let mut s = Store::new();
        s.insert_records(vec![rec("t1", "a", 0, &[])]).unwrap();
        assert!(s.index_is_stale());
        s.refresh_views().unwrap();
        assert!(!s.index_is_stale());
        s.insert_records(vec![rec("t2", "a", 0, &[])]).unwrap();
        assert!(s.index_is_stale());
    }
}
