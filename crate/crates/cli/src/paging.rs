//! Cursor pagination over a dataset's rows.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use vantage_core::Dataset;

use crate::error::ApiError;

pub const DEFAULT_PAGE: usize = 500;
pub const MAX_PAGE: usize = 10_000;

#[derive(Debug, Clone, Default, Deserialize)]
pub struct PageQuery {
    pub cursor: Option<String>,
    pub limit: Option<usize>,
    /// Which row set of a multi-part dataset: `nodes`/`edges` for graphs,
    /// `terms`/`docs`/`correlation` for topics.
    pub part: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub model: String,
    pub part: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Json>>,
    pub total: usize,
    pub next_cursor: Option<String>,
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn bad_part(part: &str, allowed: &[&str]) -> ApiError {
    ApiError::new("INVALID_ARGUMENT", format!("unknown part {part}; expected one of {}", allowed.join(", ")))
}

/// Column names and all rows of the requested part.
fn rows_of(ds: &Dataset, part: Option<&str>) -> Result<(String, Vec<String>, Vec<Vec<Json>>), ApiError> {
    let part_or = |d: &'static str| part.unwrap_or(d).to_string();
    Ok(match ds {
        Dataset::Relational(t) => {
            let p = part_or("rows");
            if p != "rows" {
                return Err(bad_part(&p, &["rows"]));
            }
            let names = t.columns.iter().map(|c| c.name.clone()).collect();
            let rows = t.rows.iter().map(|r| r.iter().map(|v| json!(v)).collect()).collect();
            (p, names, rows)
        }
        Dataset::Timeseries(series) => {
            let p = part_or("points");
            if p != "points" {
                return Err(bad_part(&p, &["points"]));
            }
            let rows = series
                .iter()
                .flat_map(|s| s.points.iter().map(move |(t, v)| vec![json!(s.name), json!(t), json!(v)]))
                .collect();
            (p, cols(&["series", "time", "value"]), rows)
        }
        Dataset::Graph(_) | Dataset::Influence(_) => {
            let g = ds.as_graph().expect("graph model");
            let p = part_or("nodes");
            match p.as_str() {
                "nodes" => {
                    let rows = g.nodes().iter().map(|n| vec![json!(n.id), json!(n.label), json!(n.props)]).collect();
                    (p, cols(&["id", "label", "props"]), rows)
                }
                "edges" => {
                    let rows = g
                        .edges()
                        .iter()
                        .map(|e| vec![json!(e.id), json!(e.source), json!(e.target), json!(e.label), json!(e.props)])
                        .collect();
                    (p, cols(&["id", "source", "target", "label", "props"]), rows)
                }
                _ => return Err(bad_part(&p, &["nodes", "edges"])),
            }
        }
        Dataset::Matrix(m) => {
            let p = part_or("cells");
            if p != "cells" {
                return Err(bad_part(&p, &["cells"]));
            }
            let mut rows = Vec::new();
            for (i, r) in m.row_labels.iter().enumerate() {
                for (j, c) in m.col_labels.iter().enumerate() {
                    rows.push(vec![json!(r), json!(c), json!(m.values[i][j])]);
                }
            }
            (p, cols(&["row", "col", "value"]), rows)
        }
        Dataset::Document(d) => {
            let p = part_or("docs");
            if p != "docs" {
                return Err(bad_part(&p, &["docs"]));
            }
            let rows = d.docs.iter().map(|x| vec![json!(x.id), json!(x.author_id), json!(x.text)]).collect();
            (p, cols(&["id", "author_id", "text"]), rows)
        }
        Dataset::Topics(t) => {
            let p = part_or("terms");
            let flat = |per: &Vec<Vec<(String, f64)>>| {
                per.iter()
                    .enumerate()
                    .flat_map(|(k, xs)| xs.iter().map(move |(s, w)| vec![json!(k), json!(s), json!(w)]))
                    .collect::<Vec<_>>()
            };
            match p.as_str() {
                "terms" => (p, cols(&["topic", "term", "weight"]), flat(&t.top_terms)),
                "docs" => (p, cols(&["topic", "doc", "weight"]), flat(&t.top_docs)),
                "correlation" => {
                    let rows = t
                        .correlation
                        .iter()
                        .enumerate()
                        .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, v)| vec![json!(i), json!(j), json!(v)]))
                        .collect();
                    (p, cols(&["topic_a", "topic_b", "correlation"]), rows)
                }
                _ => return Err(bad_part(&p, &["terms", "docs", "correlation"])),
            }
        }
    })
}

pub fn page(ds: &Dataset, q: &PageQuery) -> Result<Page, ApiError> {
    let start = match &q.cursor {
        None => 0,
        Some(c) => {
            c.parse::<usize>().map_err(|_| ApiError::new("INVALID_ARGUMENT", format!("malformed cursor {c}")))?
        }
    };
    let limit = q.limit.unwrap_or(DEFAULT_PAGE);
    if limit == 0 || limit > MAX_PAGE {
        return Err(ApiError::new("INVALID_ARGUMENT", format!("limit must lie in 1..={MAX_PAGE}")));
    }
    let (part, columns, rows) = rows_of(ds, q.part.as_deref())?;
    let total = rows.len();
    if start > total {
        return Err(ApiError::new("INVALID_ARGUMENT", format!("cursor {start} is past the end ({total} rows)")));
    }
    let end = (start + limit).min(total);
    Ok(Page {
        model: ds.model().to_string(),
        part,
        columns,
        rows: rows[start..end].to_vec(),
        total,
        next_cursor: (end < total).then(|| end.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use vantage_core::{ColumnClass, Table, Value};

    fn table(n: usize) -> Dataset {
        let mut t = Table::with_schema("t", &[("x", ColumnClass::Continuous)]).unwrap();
        for i in 0..n {
            t.push(vec![Value::Int(i as i64)]).unwrap();
        }
        Dataset::Relational(t)
    }

    #[test]
    fn walks_all_rows_once() {
        let ds = table(1234);
        let mut q = PageQuery::default();
        let mut seen = Vec::new();
        loop {
            let p = page(&ds, &q).unwrap();
            assert!(p.rows.len() <= DEFAULT_PAGE);
            seen.extend(p.rows.iter().map(|r| r[0].as_i64().unwrap()));
            match p.next_cursor {
                Some(c) => q.cursor = Some(c),
                None => break,
            }
        }
        assert_eq!(seen, (0..1234).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_cursor_and_part() {
        let ds = table(3);
        let q = PageQuery { cursor: Some("x".into()), ..Default::default() };
        assert!(page(&ds, &q).is_err());
        let q = PageQuery { part: Some("edges".into()), ..Default::default() };
        assert!(page(&ds, &q).is_err());
        let q = PageQuery { limit: Some(0), ..Default::default() };
        assert!(page(&ds, &q).is_err());
    }
}
