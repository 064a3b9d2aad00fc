//! Cross-model join indexes.
//!
//! * [`EdgeRecordIndex`] maps graph edges to the relational rows they came
//!   from (equality of an edge property and a column).
//! * [`SubgraphTermIndex`] maps the dense subgraphs of a graph (connected
//!   components of its k-core) to tf-idf term vectors over the text index.
//! * [`TimeHierarchyIndex`] is a year → month → day → hour tree of record
//!   references for interval retrieval at any granularity.
//!
//! All indexes are rebuilt rather than maintained; each remembers a
//! fingerprint of what it was built from so callers can detect staleness.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use chrono::{DateTime, Datelike, NaiveDate, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::IndexError;
use crate::store::{InvertedIndex, PropertyGraph, Table, Value};

/// A row of a named table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecordRef {
    pub table: Arc<str>,
    pub row: usize,
}

impl RecordRef {
    pub fn new(table: Arc<str>, row: usize) -> Self {
        Self { table, row }
    }
}

impl fmt::Display for RecordRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.table, self.row)
    }
}

/// Edge property ↔ table column equality.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinSpec {
    pub edge_property: String,
    pub column: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecordIndex {
    pub table: String,
    pub spec: JoinSpec,
    pub map: BTreeMap<String, BTreeSet<RecordRef>>,
    graph_fingerprint: u64,
    table_fingerprint: u64,
}

impl EdgeRecordIndex {
    pub fn rows(&self, edge_id: &str) -> Option<&BTreeSet<RecordRef>> {
        self.map.get(edge_id)
    }

    /// True if either side changed since the index was built.
    pub fn is_stale(&self, graph: &PropertyGraph, table: &Table) -> bool {
        graph.fingerprint() != self.graph_fingerprint
            || table.fingerprint() != self.table_fingerprint
            || table.name != self.table
    }
}

pub fn build_edge_record_index(
    graph: &PropertyGraph,
    table: &Table,
    spec: &JoinSpec,
) -> Result<EdgeRecordIndex, IndexError> {
    let col = table
        .column_index(&spec.column)
        .ok_or_else(|| IndexError::InvalidJoinSpec(format!("table {} has no column {}", table.name, spec.column)))?;
    if graph.edge_count() > 0 && !graph.edges().iter().any(|e| e.props.contains_key(&spec.edge_property)) {
        return Err(IndexError::InvalidJoinSpec(format!("no edge carries property {}", spec.edge_property)));
    }
    let mut by_value: HashMap<&Value, Vec<usize>> = HashMap::new();
    for (i, row) in table.rows.iter().enumerate() {
        if !row[col].is_null() {
            by_value.entry(&row[col]).or_default().push(i);
        }
    }
    let tname: Arc<str> = Arc::from(table.name.as_str());
    let mut map = BTreeMap::new();
    for e in graph.edges() {
        let rows: BTreeSet<RecordRef> = e
            .props
            .get(&spec.edge_property)
            .and_then(|v| by_value.get(v))
            .map(|rs| rs.iter().map(|&r| RecordRef::new(tname.clone(), r)).collect())
            .unwrap_or_default();
        map.insert(e.id.clone(), rows);
    }
    Ok(EdgeRecordIndex {
        table: table.name.clone(),
        spec: spec.clone(),
        map,
        graph_fingerprint: graph.fingerprint(),
        table_fingerprint: table.fingerprint(),
    })
}

/// Connected components of the k-core, edge direction ignored and
/// multi-edges counted once. Components are sorted by their smallest id.
pub fn dense_subgraphs(graph: &PropertyGraph, k: usize) -> Vec<BTreeSet<String>> {
    let n = graph.node_count();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(s, t) in graph.endpoints() {
        if s != t {
            adj[s].insert(t);
            adj[t].insert(s);
        }
    }
    let mut degree: Vec<usize> = adj.iter().map(BTreeSet::len).collect();
    let mut removed = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| degree[v] < k).collect();
    for &v in &queue {
        removed[v] = true;
    }
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !removed[w] {
                degree[w] -= 1;
                if degree[w] < k {
                    removed[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if removed[start] || seen[start] {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            comp.insert(graph.nodes()[v].id.clone());
            for &w in &adj[v] {
                if !removed[w] && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        out.push(comp);
    }
    out.sort();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphTermEntry {
    pub subgraph_id: usize,
    pub nodes: BTreeSet<String>,
    pub vector: BTreeMap<String, f64>,
}

impl SubgraphTermEntry {
    /// Highest-weighted terms, ties broken by term.
    pub fn top_terms(&self, n: usize) -> Vec<(&str, f64)> {
        let mut v: Vec<(&str, f64)> = self.vector.iter().map(|(t, w)| (t.as_str(), *w)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        v.truncate(n);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphTermIndex {
    pub k: usize,
    pub entries: Vec<SubgraphTermEntry>,
}

/// One entry per dense subgraph; the vector is the L2-normalized sum of the
/// tf-idf vectors of all documents attached to the subgraph's nodes (each
/// document counted once).
pub fn build_subgraph_term_index(
    graph: &PropertyGraph,
    k: usize,
    attachment: &BTreeMap<String, Vec<String>>,
    index: &InvertedIndex,
) -> Result<SubgraphTermIndex, IndexError> {
    let mut entries = Vec::new();
    for (sid, nodes) in dense_subgraphs(graph, k).into_iter().enumerate() {
        let mut docs = BTreeSet::new();
        for node in &nodes {
            for name in attachment.get(node).into_iter().flatten() {
                let d = index
                    .doc_id(name)
                    .ok_or_else(|| IndexError::InvalidJoinSpec(format!("node {node} attaches unknown doc {name}")))?;
                docs.insert(d);
            }
        }
        let mut vector: BTreeMap<String, f64> = BTreeMap::new();
        for d in docs {
            for (term, w) in index.tfidf_vector(d) {
                *vector.entry(term).or_default() += w;
            }
        }
        vector.retain(|_, w| *w > 0.0);
        let norm = vector.values().map(|w| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for w in vector.values_mut() {
                *w /= norm;
            }
        }
        entries.push(SubgraphTermEntry { subgraph_id: sid, nodes, vector });
    }
    Ok(SubgraphTermIndex { k, entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeLevel {
    Year,
    Month,
    Day,
    Hour,
}

impl TimeLevel {
    fn child(self) -> Option<TimeLevel> {
        match self {
            TimeLevel::Year => Some(TimeLevel::Month),
            TimeLevel::Month => Some(TimeLevel::Day),
            TimeLevel::Day => Some(TimeLevel::Hour),
            TimeLevel::Hour => None,
        }
    }

    /// Start of the span at this level containing `ts`.
    pub fn floor(self, ts: i64) -> i64 {
        let dt = DateTime::from_timestamp(ts, 0).expect("timestamp in range");
        let date = dt.date_naive();
        let start = match self {
            TimeLevel::Year => NaiveDate::from_ymd_opt(date.year(), 1, 1).expect("valid"),
            TimeLevel::Month => NaiveDate::from_ymd_opt(date.year(), date.month(), 1).expect("valid"),
            TimeLevel::Day | TimeLevel::Hour => date,
        };
        let base = start.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp();
        match self {
            TimeLevel::Hour => base + dt.hour() as i64 * 3600,
            _ => base,
        }
    }

    /// End (exclusive) of the span starting at `start`.
    pub fn span_end(self, start: i64) -> i64 {
        match self {
            TimeLevel::Hour => start + 3600,
            TimeLevel::Day => start + 86_400,
            TimeLevel::Month => {
                let d = DateTime::from_timestamp(start, 0).expect("in range").date_naive();
                let (y, m) = if d.month() == 12 { (d.year() + 1, 1) } else { (d.year(), d.month() + 1) };
                NaiveDate::from_ymd_opt(y, m, 1)
                    .expect("valid")
                    .and_hms_opt(0, 0, 0)
                    .expect("midnight")
                    .and_utc()
                    .timestamp()
            }
            TimeLevel::Year => {
                let d = DateTime::from_timestamp(start, 0).expect("in range").date_naive();
                NaiveDate::from_ymd_opt(d.year() + 1, 1, 1)
                    .expect("valid")
                    .and_hms_opt(0, 0, 0)
                    .expect("midnight")
                    .and_utc()
                    .timestamp()
            }
        }
    }
}

/// A node of the time hierarchy covering `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeNode {
    pub level: TimeLevel,
    pub start: i64,
    pub end: i64,
    pub refs: BTreeSet<RecordRef>,
    pub children: BTreeMap<i64, TimeNode>,
    /// Leaf (hour) nodes only: the timestamped records, sorted by time.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entries: Vec<(i64, RecordRef)>,
}

impl TimeNode {
    fn new(level: TimeLevel, start: i64) -> Self {
        Self {
            level,
            start,
            end: level.span_end(start),
            refs: BTreeSet::new(),
            children: BTreeMap::new(),
            entries: Vec::new(),
        }
    }

    fn insert(&mut self, ts: i64, r: RecordRef) {
        self.refs.insert(r.clone());
        match self.level.child() {
            Some(cl) => {
                let cs = cl.floor(ts);
                self.children.entry(cs).or_insert_with(|| TimeNode::new(cl, cs)).insert(ts, r);
            }
            None => self.entries.push((ts, r)),
        }
    }

    fn finish(&mut self) {
        self.entries.sort();
        for c in self.children.values_mut() {
            c.finish();
        }
    }

    fn collect(&self, start: i64, end: i64, out: &mut BTreeSet<RecordRef>) {
        if self.end <= start || self.start >= end {
            return;
        }
        if start <= self.start && self.end <= end {
            out.extend(self.refs.iter().cloned());
            return;
        }
        if self.children.is_empty() {
            out.extend(self.entries.iter().filter(|(t, _)| *t >= start && *t < end).map(|(_, r)| r.clone()));
            return;
        }
        for c in self.children.values() {
            c.collect(start, end, out);
        }
    }

    fn check(&self) -> Result<(), String> {
        let union: BTreeSet<RecordRef> = if self.level == TimeLevel::Hour {
            self.entries.iter().map(|(_, r)| r.clone()).collect()
        } else {
            self.children.values().flat_map(|c| c.refs.iter().cloned()).collect()
        };
        if union != self.refs {
            return Err(format!("{:?} node at {} violates parent-union", self.level, self.start));
        }
        let mut prev_end = i64::MIN;
        for c in self.children.values() {
            if c.start < prev_end || c.start < self.start || c.end > self.end {
                return Err(format!("child spans overlap under {}", self.start));
            }
            if c.refs.is_empty() {
                return Err(format!("empty span {} retained", c.start));
            }
            prev_end = c.end;
            c.check()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeHierarchyIndex {
    pub years: BTreeMap<i64, TimeNode>,
    pub len: usize,
}

impl TimeHierarchyIndex {
    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    /// The chain of nodes from year down to hour containing `ts`.
    pub fn path(&self, ts: i64) -> Vec<&TimeNode> {
        let mut out = Vec::new();
        let mut node = self.years.get(&TimeLevel::Year.floor(ts));
        while let Some(n) = node {
            out.push(n);
            node = n.level.child().and_then(|cl| n.children.get(&cl.floor(ts)));
        }
        out
    }

    /// All nodes at one level, in time order.
    pub fn level(&self, level: TimeLevel) -> Vec<&TimeNode> {
        let mut frontier: Vec<&TimeNode> = self.years.values().collect();
        while frontier.first().is_some_and(|n| n.level != level) {
            frontier = frontier.iter().flat_map(|n| n.children.values()).collect();
        }
        frontier
    }

    /// Parent-union invariant and disjoint sibling spans, checked
    /// structurally over the whole tree.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut total = 0;
        for y in self.years.values() {
            y.check()?;
            total += y.refs.len();
        }
        if total != self.len {
            return Err(format!("root holds {total} refs, expected {}", self.len));
        }
        Ok(())
    }
}

pub fn build_time_hierarchy(records: impl IntoIterator<Item = (RecordRef, i64)>) -> TimeHierarchyIndex {
    let mut idx = TimeHierarchyIndex::default();
    let mut seen = BTreeSet::new();
    for (r, ts) in records {
        if !seen.insert(r.clone()) {
            continue;
        }
        let ys = TimeLevel::Year.floor(ts);
        idx.years.entry(ys).or_insert_with(|| TimeNode::new(TimeLevel::Year, ys)).insert(ts, r);
        idx.len += 1;
    }
    for y in idx.years.values_mut() {
        y.finish();
    }
    idx
}

/// Records with `start <= timestamp < end`, assembled from the maximal
/// fully-covered nodes plus a scan of the partially covered hour leaves.
pub fn time_range_lookup(index: &TimeHierarchyIndex, start: i64, end: i64) -> Result<BTreeSet<RecordRef>, IndexError> {
    if start >= end {
        return Err(IndexError::InvalidInterval { start, end });
    }
    let mut out = BTreeSet::new();
    for y in index.years.values() {
        y.collect(start, end, &mut out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{ColumnClass, Properties};
    use proptest::prelude::*;

    fn rref(row: usize) -> RecordRef {
        RecordRef::new(Arc::from("t"), row)
    }

    #[test]
    fn single_record_path() {
        // 2019-03-01T10:15:00Z
        let idx = build_time_hierarchy([(rref(0), 1_551_435_300)]);
        let path = idx.path(1_551_435_300);
        assert_eq!(path.len(), 4);
        let levels: Vec<TimeLevel> = path.iter().map(|n| n.level).collect();
        assert_eq!(levels, vec![TimeLevel::Year, TimeLevel::Month, TimeLevel::Day, TimeLevel::Hour]);
        let starts: Vec<String> = path
            .iter()
            .map(|n| DateTime::from_timestamp(n.start, 0).unwrap().format("%Y-%m-%dT%H").to_string())
            .collect();
        assert_eq!(starts, vec!["2019-01-01T00", "2019-03-01T00", "2019-03-01T00", "2019-03-01T10"]);
        assert!(path.iter().all(|n| n.refs.contains(&rref(0))));
        idx.check_invariants().unwrap();
    }

    #[test]
    fn empty_input() {
        let idx = build_time_hierarchy(Vec::new());
        assert!(idx.is_empty());
        idx.check_invariants().unwrap();
    }

    #[test]
    fn lookup_edges() {
        let idx = build_time_hierarchy([(rref(0), 100), (rref(1), 5000)]);
        assert_eq!(time_range_lookup(&idx, 0, 10_000).unwrap().len(), 2);
        assert!(time_range_lookup(&idx, 101, 102).unwrap().is_empty());
        assert!(time_range_lookup(&idx, 5, 5).is_err());
    }

    #[test]
    fn month_and_year_rollover() {
        assert_eq!(TimeLevel::Month.span_end(TimeLevel::Month.floor(1_575_158_400)), 1_577_836_800);
        assert_eq!(TimeLevel::Year.span_end(TimeLevel::Year.floor(1_551_435_300)), 1_577_836_800);
    }

    fn triangle_plus_tail() -> PropertyGraph {
        let mut g = PropertyGraph::new(false);
        for id in ["a", "b", "c", "d"] {
            g.add_node(id, "N", Properties::new()).unwrap();
        }
        for (i, (s, t)) in [("a", "b"), ("b", "c"), ("c", "a"), ("c", "d")].iter().enumerate() {
            g.add_edge(format!("e{i}"), s, t, "E", Properties::new()).unwrap();
        }
        g
    }

    #[test]
    fn triangle_is_its_own_two_core() {
        let cores = dense_subgraphs(&triangle_plus_tail(), 2);
        assert_eq!(cores.len(), 1);
        assert_eq!(cores[0], ["a", "b", "c"].iter().map(|s| s.to_string()).collect());
    }

    #[test]
    fn path_has_no_two_core() {
        let mut g = PropertyGraph::new(false);
        for id in ["a", "b", "c"] {
            g.add_node(id, "N", Properties::new()).unwrap();
        }
        g.add_edge("1", "a", "b", "E", Properties::new()).unwrap();
        g.add_edge("2", "b", "c", "E", Properties::new()).unwrap();
        g.add_edge("3", "b", "c", "E", Properties::new()).unwrap();
        assert!(dense_subgraphs(&g, 2).is_empty());
    }

    #[test]
    fn edge_record_index_equality() {
        let mut g = PropertyGraph::new(true);
        g.add_node("a", "Author", Properties::new()).unwrap();
        g.add_node("b", "Author", Properties::new()).unwrap();
        let p = |v: &str| Properties::from([("tweet_id".to_string(), Value::str(v))]);
        g.add_edge("m1", "a", "b", "MENTIONS", p("t7")).unwrap();
        g.add_edge("m2", "a", "b", "MENTIONS", p("t99")).unwrap();
        let mut t = Table::with_schema("tweets", &[("tweet_id", ColumnClass::Identifier)]).unwrap();
        for id in ["t1", "t2", "t3", "t7"] {
            t.push(vec![Value::str(id)]).unwrap();
        }
        let spec = JoinSpec { edge_property: "tweet_id".into(), column: "tweet_id".into() };
        let idx = build_edge_record_index(&g, &t, &spec).unwrap();
        assert_eq!(idx.rows("m1").unwrap(), &BTreeSet::from([RecordRef::new(Arc::from("tweets"), 3)]));
        assert!(idx.rows("m2").unwrap().is_empty());
        assert!(!idx.is_stale(&g, &t));
        t.push(vec![Value::str("t99")]).unwrap();
        assert!(idx.is_stale(&g, &t));

        let bad = JoinSpec { edge_property: "tweet_id".into(), column: "nope".into() };
        assert!(build_edge_record_index(&g, &t, &bad).is_err());
        let bad = JoinSpec { edge_property: "nope".into(), column: "tweet_id".into() };
        assert!(build_edge_record_index(&g, &t, &bad).is_err());
    }

    #[test]
    fn subgraph_term_vectors() {
        let g = triangle_plus_tail();
        let mut idx = InvertedIndex::new();
        idx.add_document("d1", "prep prep hiv", &[]);
        idx.add_document("d2", "unrelated words", &[]);
        let att = BTreeMap::from([("a".to_string(), vec!["d1".to_string()])]);
        let sti = build_subgraph_term_index(&g, 2, &att, &idx).unwrap();
        assert_eq!(sti.entries.len(), 1);
        let v = &sti.entries[0].vector;
        assert!(v["prep"] > v["hiv"]);
        let norm: f64 = v.values().map(|w| w * w).sum();
        assert!((norm - 1.0).abs() < 1e-12);

        let none = build_subgraph_term_index(&g, 2, &BTreeMap::new(), &idx).unwrap();
        assert!(none.entries[0].vector.is_empty());
    }

    proptest! {
        #[test]
        fn lookup_distributes_over_partition(
            ts in proptest::collection::vec(1_546_300_800i64..1_554_000_000, 0..200),
            a in 1_546_300_800i64..1_550_000_000,
            gap1 in 1i64..3_000_000,
            gap2 in 1i64..3_000_000,
        ) {
            let idx = build_time_hierarchy(ts.iter().enumerate().map(|(i, &t)| (rref(i), t)));
            let b = a + gap1;
            let c = b + gap2;
            let whole = time_range_lookup(&idx, a, c).unwrap();
            let mut parts = time_range_lookup(&idx, a, b).unwrap();
            parts.extend(time_range_lookup(&idx, b, c).unwrap());
            prop_assert_eq!(whole, parts);
            prop_assert!(idx.check_invariants().is_ok());
        }
    }
}
