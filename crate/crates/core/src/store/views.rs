//! Materialized view definitions and their (full) recomputation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::table::{Column, ColumnClass, Table, Value};
use super::timeseries::Granularity;
use super::transform::{build_graph_from_relation, GraphMappingSpec};
use super::Store;
use crate::dataset::{DataModel, Dataset, Matrix};
use crate::error::StoreError;

fn one() -> u64 {
    1
}

/// What a view computes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViewSource {
    /// Tweet counts per bucket, optionally for one hashtag.
    TweetCounts {
        #[serde(default)]
        granularity: Granularity,
        #[serde(default)]
        hashtag: Option<String>,
    },
    /// `(hashtag, tweet_count)`, most used first.
    HashtagCounts,
    /// `(tag_a, tag_b, count)` with `tag_a < tag_b`.
    Cooccurrence {
        #[serde(default = "one")]
        min_count: u64,
    },
    Projection {
        table: String,
        #[serde(default)]
        columns: Option<Vec<String>>,
    },
    GroupCount {
        table: String,
        by: Vec<String>,
    },
    CountMatrix {
        table: String,
        row: String,
        col: String,
    },
    Graph {
        mapping: GraphMappingSpec,
    },
    /// `(tweet_id, score)` in ranking order.
    TextQuery {
        query: String,
    },
}

impl ViewSource {
    pub fn model(&self) -> DataModel {
        match self {
            ViewSource::TweetCounts { .. } => DataModel::Timeseries,
            ViewSource::Graph { .. } => DataModel::Graph,
            ViewSource::CountMatrix { .. } => DataModel::Matrix,
            _ => DataModel::Relational,
        }
    }

    pub fn compute(&self, store: &Store) -> Result<Dataset, StoreError> {
        Ok(match self {
            ViewSource::TweetCounts { granularity, hashtag } => {
                Dataset::Timeseries(vec![store.tweet_counts(*granularity, hashtag.as_deref())])
            }
            ViewSource::HashtagCounts => Dataset::Relational(hashtag_counts(store)),
            ViewSource::Cooccurrence { min_count } => Dataset::Relational(cooccurrence_counts(store, *min_count)),
            ViewSource::Projection { table, columns } => {
                let t = store.scan(table)?;
                let t = match columns {
                    Some(cols) => t.project(cols)?,
                    None => t.into_owned(),
                };
                Dataset::Relational(t)
            }
            ViewSource::GroupCount { table, by } => {
                Dataset::Relational(group_count(&*store.scan(table)?, by, None, "count")?)
            }
            ViewSource::CountMatrix { table, row, col } => {
                Dataset::Matrix(count_matrix(&*store.scan(table)?, row, col)?)
            }
            ViewSource::Graph { mapping } => Dataset::Graph(build_graph_from_relation(mapping, store)?),
            ViewSource::TextQuery { query } => {
                let hits = store.text_index().search(query)?;
                let mut t = Table::with_schema(
                    "search",
                    &[("tweet_id", ColumnClass::Identifier), ("score", ColumnClass::Continuous)],
                )?;
                for h in hits {
                    t.push(vec![Value::Str(h.name), Value::Real(h.score)])?;
                }
                Dataset::Relational(t)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterializedViewDef {
    pub view_id: String,
    pub source: ViewSource,
    pub target_model: DataModel,
    #[serde(default)]
    pub description: String,
}

impl MaterializedViewDef {
    pub fn validate(&self) -> Result<(), StoreError> {
        if self.view_id.trim().is_empty() {
            return Err(StoreError::InvalidViewDef("empty view id".into()));
        }
        if self.source.model() != self.target_model {
            return Err(StoreError::InvalidViewDef(format!(
                "source produces {} but target model is {}",
                self.source.model(),
                self.target_model
            )));
        }
        if let ViewSource::TextQuery { query } = &self.source {
            super::text::SearchQuery::parse(query)?;
        }
        Ok(())
    }
}

pub(crate) fn hashtag_counts(store: &Store) -> Table {
    let mut counts: BTreeMap<&str, i64> = BTreeMap::new();
    for r in store.stat_records() {
        for h in &r.hashtags {
            *counts.entry(h).or_default() += 1;
        }
    }
    let mut rows: Vec<(&str, i64)> = counts.into_iter().collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let mut t = Table::with_schema(
        "hashtag_counts",
        &[("hashtag", ColumnClass::Categorical), ("tweet_count", ColumnClass::Continuous)],
    )
    .expect("static schema");
    t.rows = rows.into_iter().map(|(h, n)| vec![Value::str(h), Value::Int(n)]).collect();
    t
}

pub(crate) fn cooccurrence_counts(store: &Store, min_count: u64) -> Table {
    let mut pairs: BTreeMap<(&str, &str), i64> = BTreeMap::new();
    for r in store.stat_records() {
        let tags: BTreeSet<&str> = r.hashtags.iter().map(String::as_str).collect();
        let tags: Vec<&str> = tags.into_iter().collect();
        for i in 0..tags.len() {
            for j in i + 1..tags.len() {
                *pairs.entry((tags[i], tags[j])).or_default() += 1;
            }
        }
    }
    let mut t = Table::with_schema(
        "cooccurrence",
        &[("tag_a", ColumnClass::Categorical), ("tag_b", ColumnClass::Categorical), ("count", ColumnClass::Continuous)],
    )
    .expect("static schema");
    t.rows = pairs
        .into_iter()
        .filter(|&(_, n)| n as u64 >= min_count)
        .map(|((a, b), n)| vec![Value::str(a), Value::str(b), Value::Int(n)])
        .collect();
    t
}

/// Groups rows by `by` and counts them (or counts distinct values of
/// `distinct`). Output is ordered by group key.
pub fn group_count(t: &Table, by: &[String], distinct: Option<&str>, count_name: &str) -> Result<Table, StoreError> {
    let idx: Vec<usize> = by.iter().map(|c| t.col(c)).collect::<Result<_, _>>()?;
    let dcol = distinct.map(|d| t.col(d)).transpose()?;
    let mut groups: BTreeMap<Vec<Value>, BTreeSet<Value>> = BTreeMap::new();
    let mut counts: BTreeMap<Vec<Value>, i64> = BTreeMap::new();
    for row in &t.rows {
        let key: Vec<Value> = idx.iter().map(|&i| row[i].clone()).collect();
        match dcol {
            Some(d) => {
                groups.entry(key).or_default().insert(row[d].clone());
            }
            None => *counts.entry(key).or_default() += 1,
        }
    }
    if dcol.is_some() {
        counts = groups.into_iter().map(|(k, v)| (k, v.len() as i64)).collect();
    }
    let mut columns: Vec<Column> = idx.iter().map(|&i| t.columns[i].clone()).collect();
    columns.push(Column::new(count_name, ColumnClass::Continuous));
    let mut out = Table::new(t.name.clone(), columns)?;
    out.rows = counts
        .into_iter()
        .map(|(mut k, n)| {
            k.push(Value::Int(n));
            k
        })
        .collect();
    Ok(out)
}

pub(crate) fn count_matrix(t: &Table, row: &str, col: &str) -> Result<Matrix, StoreError> {
    let r = t.col(row)?;
    let c = t.col(col)?;
    let rows: BTreeSet<String> = t.values(r).map(Value::key_string).collect();
    let cols: BTreeSet<String> = t.values(c).map(Value::key_string).collect();
    let rows: Vec<String> = rows.into_iter().collect();
    let cols: Vec<String> = cols.into_iter().collect();
    let mut values = vec![vec![0.0; cols.len()]; rows.len()];
    for row_vals in &t.rows {
        let i = rows.binary_search(&row_vals[r].key_string()).expect("collected");
        let j = cols.binary_search(&row_vals[c].key_string()).expect("collected");
        values[i][j] += 1.0;
    }
    Ok(Matrix { name: format!("{}:{row}x{col}", t.name), row_labels: rows, col_labels: cols, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::TweetRecord;

    fn rec(id: &str, t: i64, tags: &[&str]) -> TweetRecord {
        TweetRecord {
            tweet_id: id.into(),
            author_id: format!("a{id}"),
            created_at: t,
            text: String::new(),
            hashtags: tags.iter().map(|s| s.to_string()).collect(),
            mentions: vec![],
            reply_to: None,
            retweet_of: None,
        }
    }

    fn fixture() -> Store {
        let mut s = Store::new();
        s.insert_records(vec![
            rec("t1", 0, &["hiv", "prep"]),
            rec("t2", 10, &["hiv", "prep"]),
            rec("t3", 7300, &["prep", "condomless"]),
        ])
        .unwrap();
        s
    }

    /// All ordered pairs per tweet, counted by brute force.
    fn pair_oracle(s: &Store) -> BTreeMap<(String, String), i64> {
        let mut m = BTreeMap::new();
        for r in s.records() {
            for a in &r.hashtags {
                for b in &r.hashtags {
                    if a < b {
                        *m.entry((a.clone(), b.clone())).or_default() += 1;
                    }
                }
            }
        }
        m
    }

    #[test]
    fn cooccurrence_view() {
        let mut s = fixture();
        s.register_view(MaterializedViewDef {
            view_id: "co".into(),
            source: ViewSource::Cooccurrence { min_count: 1 },
            target_model: DataModel::Relational,
            description: String::new(),
        })
        .unwrap();
        let v = s.view("co").unwrap();
        let t = v.as_table().unwrap();
        assert!(t.rows.contains(&vec![Value::str("hiv"), Value::str("prep"), Value::Int(2)]));
        let oracle = pair_oracle(&s);
        assert_eq!(t.len(), oracle.len());
        for row in &t.rows {
            let key = (row[0].key_string(), row[1].key_string());
            assert_eq!(Some(&row[2].as_i64().unwrap()), oracle.get(&key));
        }
    }

    #[test]
    fn hourly_view_one_point_per_nonempty_hour() {
        let mut s = fixture();
        s.register_view(MaterializedViewDef {
            view_id: "hourly".into(),
            source: ViewSource::TweetCounts { granularity: Granularity::Hour, hashtag: None },
            target_model: DataModel::Timeseries,
            description: String::new(),
        })
        .unwrap();
        let Dataset::Timeseries(ts) = &*s.view("hourly").unwrap() else { panic!() };
        assert_eq!(ts[0].points, vec![(0, 2.0), (7200, 1.0)]);

        s.insert_records(vec![rec("t4", 7400, &[])]).unwrap();
        let before = s.view("hourly").unwrap();
        s.refresh_views().unwrap();
        let Dataset::Timeseries(ts) = &*s.view("hourly").unwrap() else { panic!() };
        assert_eq!(ts[0].points, vec![(0, 2.0), (7200, 2.0)]);
        assert_ne!(*before, *s.view("hourly").unwrap());

        // no base change: identical content
        let snapshot = serde_json::to_string(&*s.view("hourly").unwrap()).unwrap();
        s.refresh_views().unwrap();
        assert_eq!(snapshot, serde_json::to_string(&*s.view("hourly").unwrap()).unwrap());
    }

    #[test]
    fn duplicate_and_invalid_defs() {
        let mut s = fixture();
        let def = MaterializedViewDef {
            view_id: "h".into(),
            source: ViewSource::HashtagCounts,
            target_model: DataModel::Relational,
            description: String::new(),
        };
        s.register_view(def.clone()).unwrap();
        assert!(matches!(s.register_view(def), Err(StoreError::DuplicateViewId(_))));
        let bad = MaterializedViewDef {
            view_id: "g".into(),
            source: ViewSource::HashtagCounts,
            target_model: DataModel::Graph,
            description: String::new(),
        };
        assert!(matches!(s.register_view(bad), Err(StoreError::InvalidViewDef(_))));
    }

    #[test]
    fn failing_view_keeps_previous_state() {
        let mut s = fixture();
        s.register_view(MaterializedViewDef {
            view_id: "p".into(),
            source: ViewSource::Projection { table: "tweets".into(), columns: None },
            target_model: DataModel::Relational,
            description: String::new(),
        })
        .unwrap();
        // sneak in a definition that cannot be computed
        s.views.push(MaterializedViewDef {
            view_id: "broken".into(),
            source: ViewSource::Projection { table: "nope".into(), columns: None },
            target_model: DataModel::Relational,
            description: String::new(),
        });
        s.insert_records(vec![rec("t9", 0, &[])]).unwrap();
        assert!(s.refresh_views().is_err());
        assert_eq!(s.view("p").unwrap().as_table().unwrap().len(), 3);
    }

    #[test]
    fn json_view_definition() {
        let def: MaterializedViewDef = serde_json::from_str(
            r#"{"view_id":"mention_graph","target_model":"graph","description":"mentions",
                "source":{"kind":"graph","mapping":{"edge_rules":[{"table":"mention_edges",
                "source_column":"src","target_column":"dst","label":"MENTIONS"}]}}}"#,
        )
        .unwrap();
        let mut s = fixture();
        s.register_view(def).unwrap();
        assert_eq!(s.view("mention_graph").unwrap().model(), DataModel::Graph);
    }
}
