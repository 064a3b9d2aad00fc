//! Cross-model operations: graph ↔ relational merge, similarity join, top-k.

use std::collections::BTreeMap;

use crate::error::QueryError;
use crate::store::{PropertyGraph, Table, Value};
use crate::xindex::EdgeRecordIndex;

/// Copies `projection` columns of each edge's mapped rows onto the edge.
/// The lowest row ordinal wins; `rec_count` holds the number of mapped
/// rows. Null cells are not copied.
pub fn merge_graph_relational(
    g: &PropertyGraph,
    t: &Table,
    idx: &EdgeRecordIndex,
    projection: &[String],
) -> Result<PropertyGraph, QueryError> {
    if idx.is_stale(g, t) {
        return Err(QueryError::StaleIndex(format!(
            "edge-record index over {} no longer matches its inputs",
            idx.table
        )));
    }
    let cols: Vec<(String, usize)> =
        projection.iter().map(|c| t.col(c).map(|i| (c.clone(), i))).collect::<Result<_, _>>()?;
    let mut out = g.clone();
    for e in g.edges() {
        let rows = idx.rows(&e.id);
        let n = rows.map_or(0, |r| r.len());
        let edge = out.edge_mut(&e.id).expect("cloned graph");
        if let Some(first) = rows.and_then(|r| r.iter().next()) {
            for (name, ci) in &cols {
                let v = &t.rows[first.row][*ci];
                if !v.is_null() {
                    edge.props.insert(name.clone(), v.clone());
                }
            }
        }
        edge.props.insert("rec_count".into(), Value::Int(n as i64));
    }
    Ok(out)
}

pub type TermVector = BTreeMap<String, f64>;

pub fn cosine(a: &TermVector, b: &TermVector) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small.iter().filter_map(|(k, x)| large.get(k).map(|y| x * y)).sum();
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).min(1.0)
    }
}

/// All pairs with cosine ≥ `threshold`, by descending cosine then id pair.
pub fn similarity_join(
    left: &[(String, TermVector)],
    right: &[(String, TermVector)],
    threshold: f64,
) -> Result<Vec<(String, String, f64)>, QueryError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(QueryError::InvalidArgument(format!("threshold {threshold} not in [0, 1]")));
    }
    if left.iter().chain(right).any(|(_, v)| v.values().any(|x| *x < 0.0)) {
        return Err(QueryError::InvalidArgument("term vectors must be non-negative".into()));
    }
    // invert the right side so that only pairs sharing a term are scored
    let mut postings: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (j, (_, v)) in right.iter().enumerate() {
        for (term, w) in v {
            if *w > 0.0 {
                postings.entry(term).or_default().push(j);
            }
        }
    }
    let mut out = Vec::new();
    for (lid, lv) in left {
        let mut cands: Vec<usize> = lv
            .iter()
            .filter(|(_, w)| **w > 0.0)
            .flat_map(|(t, _)| postings.get(t.as_str()).into_iter().flatten().copied())
            .collect();
        cands.sort_unstable();
        cands.dedup();
        let scored: Vec<usize> = if threshold <= 0.0 { (0..right.len()).collect() } else { cands };
        for j in scored {
            let c = cosine(lv, &right[j].1);
            if c >= threshold {
                out.push((lid.clone(), right[j].0.clone(), c));
            }
        }
    }
    out.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| (&a.0, &a.1).cmp(&(&b.0, &b.1))));
    Ok(out)
}

/// First `k` rows of a stable sort on a numeric column; nulls sort last.
pub fn topk(t: &Table, column: &str, k: usize, descending: bool) -> Result<Table, QueryError> {
    let ci = t.col(column)?;
    if !t.columns[ci].class.is_numeric() {
        return Err(QueryError::ColumnNotNumeric(column.to_string()));
    }
    if k == 0 {
        return Err(QueryError::InvalidArgument("k must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (t.rows[a][ci].as_f64(), t.rows[b][ci].as_f64());
        match (x, y) {
            (Some(x), Some(y)) if descending => y.total_cmp(&x),
            (Some(x), Some(y)) => x.total_cmp(&y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        }
    });
    let mut out = Table::new(t.name.clone(), t.columns.clone())?;
    out.rows = order.into_iter().take(k).map(|i| t.rows[i].clone()).collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{ColumnClass, Properties};
    use crate::xindex::{build_edge_record_index, JoinSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tv(pairs: &[(&str, f64)]) -> TermVector {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn cosine_basics() {
        let a = tv(&[("x", 1.0)]);
        let b = tv(&[("y", 1.0)]);
        let l = vec![("l".to_string(), a.clone())];
        assert_eq!(similarity_join(&l, &[("r".into(), a.clone())], 0.3).unwrap()[0].2, 1.0);
        assert!(similarity_join(&l, &[("r".into(), b)], 0.3).unwrap().is_empty());
    }

    #[test]
    fn similarity_join_matches_all_pairs_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut side = |p: &str| -> Vec<(String, TermVector)> {
            (0..50)
                .map(|i| {
                    let v = (0..rng.random_range(0..5))
                        .map(|_| (format!("t{}", rng.random_range(0..30)), rng.random_range(0.1..3.0)))
                        .collect();
                    (format!("{p}{i}"), v)
                })
                .collect()
        };
        let left = side("l");
        let right = side("r");
        let got = similarity_join(&left, &right, 0.2).unwrap();
        let mut oracle = Vec::new();
        for (a, va) in &left {
            for (b, vb) in &right {
                let dot: f64 = va.iter().map(|(k, x)| x * vb.get(k).unwrap_or(&0.0)).sum();
                let n = va.values().map(|x| x * x).sum::<f64>().sqrt() * vb.values().map(|x| x * x).sum::<f64>().sqrt();
                let c = if n == 0.0 { 0.0 } else { dot / n };
                if c >= 0.2 {
                    oracle.push((a.clone(), b.clone()));
                }
            }
        }
        let mut pairs: Vec<(String, String)> = got.iter().map(|x| (x.0.clone(), x.1.clone())).collect();
        pairs.sort();
        oracle.sort();
        assert_eq!(pairs, oracle);
        let mut swapped: Vec<(String, String)> =
            similarity_join(&right, &left, 0.2).unwrap().into_iter().map(|x| (x.1, x.0)).collect();
        swapped.sort();
        assert_eq!(swapped, pairs);
    }

    fn hist() -> Table {
        let mut t =
            Table::with_schema("h", &[("hashtag", ColumnClass::Categorical), ("n", ColumnClass::Continuous)]).unwrap();
        for (h, n) in [("a", 5), ("b", 9), ("c", 5)] {
            t.push(vec![Value::str(h), Value::Int(n)]).unwrap();
        }
        t
    }

    #[test]
    fn topk_cases() {
        let t = hist();
        let one = topk(&t, "n", 1, true).unwrap();
        assert_eq!(one.rows, vec![vec![Value::str("b"), Value::Int(9)]]);
        let all = topk(&t, "n", 10, true).unwrap();
        let order: Vec<String> = all.rows.iter().map(|r| r[0].key_string()).collect();
        assert_eq!(order, ["b", "a", "c"]);
        assert!(matches!(topk(&t, "hashtag", 1, true), Err(QueryError::ColumnNotNumeric(_))));
    }

    #[test]
    fn merge_matches_join_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut g = PropertyGraph::new(true);
        for i in 0..20 {
            g.add_node(format!("n{i}"), "Author", Properties::new()).unwrap();
        }
        for e in 0..200 {
            let key = Value::str(format!("t{}", rng.random_range(0..150)));
            let props = Properties::from([("tweet_id".to_string(), key)]);
            let (s, d) = (rng.random_range(0..20), rng.random_range(0..20));
            g.add_edge(format!("e{e}"), &format!("n{s}"), &format!("n{d}"), "MENTIONS", props).unwrap();
        }
        let mut t = Table::with_schema(
            "tweets",
            &[
                ("tweet_id", ColumnClass::Identifier),
                ("lang", ColumnClass::Categorical),
                ("n", ColumnClass::Continuous),
            ],
        )
        .unwrap();
        for r in 0..180 {
            t.push(vec![
                Value::str(format!("t{}", rng.random_range(0..120))),
                Value::str(["en", "es"][r % 2]),
                Value::Int(r as i64),
            ])
            .unwrap();
        }
        let spec = JoinSpec { edge_property: "tweet_id".into(), column: "tweet_id".into() };
        let idx = build_edge_record_index(&g, &t, &spec).unwrap();
        let proj = vec!["lang".to_string(), "n".to_string()];
        let merged = merge_graph_relational(&g, &t, &idx, &proj).unwrap();
        for e in merged.edges() {
            let key = &g.edge(&e.id).unwrap().props["tweet_id"];
            let matches: Vec<&Vec<Value>> = t.rows.iter().filter(|r| &r[0] == key).collect();
            assert_eq!(e.props["rec_count"], Value::Int(matches.len() as i64));
            match matches.first() {
                Some(r) => {
                    assert_eq!(e.props["lang"], r[1]);
                    assert_eq!(e.props["n"], r[2]);
                }
                None => assert!(!e.props.contains_key("lang")),
            }
        }
        t.push(vec![Value::str("t1"), Value::str("en"), Value::Int(0)]).unwrap();
        assert!(matches!(merge_graph_relational(&g, &t, &idx, &proj), Err(QueryError::StaleIndex(_))));
    }
}
