//! Property graph with labelled nodes and edges.
//!
//! Nodes and edges keep their insertion order, which is also the order every
//! iteration API returns. Multi-edges are allowed; analytics that need a
//! simple graph collapse them explicitly.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::table::Value;
use crate::error::StoreError;

pub type Properties = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub label: String,
    #[serde(default)]
    pub props: Properties,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: String,
    pub source: String,
    pub target: String,
    pub label: String,
    #[serde(default)]
    pub props: Properties,
}

/// Traversal direction relative to a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Out,
    In,
    Any,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphRepr {
    directed: bool,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "GraphRepr", try_from = "GraphRepr")]
pub struct PropertyGraph {
    directed: bool,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    node_index: HashMap<String, usize>,
    edge_index: HashMap<String, usize>,
    // per node: (edge ordinal, neighbour ordinal)
    out_adj: Vec<Vec<(usize, usize)>>,
    in_adj: Vec<Vec<(usize, usize)>>,
    endpoints: Vec<(usize, usize)>,
}

impl PartialEq for PropertyGraph {
    fn eq(&self, other: &Self) -> bool {
        self.directed == other.directed && self.nodes == other.nodes && self.edges == other.edges
    }
}

impl From<PropertyGraph> for GraphRepr {
    fn from(g: PropertyGraph) -> Self {
        GraphRepr { directed: g.directed, nodes: g.nodes, edges: g.edges }
    }
}

impl TryFrom<GraphRepr> for PropertyGraph {
    type Error = StoreError;

    fn try_from(r: GraphRepr) -> Result<Self, Self::Error> {
        let mut g = PropertyGraph::new(r.directed);
        for n in r.nodes {
            g.add_node(n.id, n.label, n.props)?;
        }
        for e in r.edges {
            g.add_edge(e.id, &e.source, &e.target, e.label, e.props)?;
        }
        Ok(g)
    }
}

impl PropertyGraph {
    pub fn new(directed: bool) -> Self {
        Self {
            directed,
            nodes: Vec::new(),
            edges: Vec::new(),
            node_index: HashMap::new(),
            edge_index: HashMap::new(),
            out_adj: Vec::new(),
            in_adj: Vec::new(),
            endpoints: Vec::new(),
        }
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.node_index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn node_ordinal(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn edge(&self, id: &str) -> Option<&Edge> {
        self.edge_index.get(id).map(|&i| &self.edges[i])
    }

    pub fn edge_mut(&mut self, id: &str) -> Option<&mut Edge> {
        self.edge_index.get(id).map(|&i| &mut self.edges[i])
    }

    pub fn contains_node(&self, id: &str) -> bool {
        self.node_index.contains_key(id)
    }

    /// `(source ordinal, target ordinal)` of each edge, by edge ordinal.
    pub fn endpoints(&self) -> &[(usize, usize)] {
        &self.endpoints
    }

    pub fn add_node(
        &mut self,
        id: impl Into<String>,
        label: impl Into<String>,
        props: Properties,
    ) -> Result<usize, StoreError> {
        let id = id.into();
        if self.node_index.contains_key(&id) {
            return Err(StoreError::DuplicateId(format!("node {id}")));
        }
        let ord = self.nodes.len();
        self.node_index.insert(id.clone(), ord);
        self.nodes.push(Node { id, label: label.into(), props });
        self.out_adj.push(Vec::new());
        self.in_adj.push(Vec::new());
        Ok(ord)
    }

    /// Inserts the node unless it exists; returns its ordinal either way.
    pub fn ensure_node(&mut self, id: &str, label: &str, props: impl FnOnce() -> Properties) -> usize {
        match self.node_index.get(id) {
            Some(&i) => i,
            None => self.add_node(id, label, props()).expect("node id checked absent"),
        }
    }

    pub fn add_edge(
        &mut self,
        id: impl Into<String>,
        source: &str,
        target: &str,
        label: impl Into<String>,
        props: Properties,
    ) -> Result<usize, StoreError> {
        let id = id.into();
        if self.edge_index.contains_key(&id) {
            return Err(StoreError::DuplicateId(format!("edge {id}")));
        }
        let s = self.node_ordinal(source).ok_or_else(|| StoreError::NodeNotFound(source.to_string()))?;
        let t = self.node_ordinal(target).ok_or_else(|| StoreError::NodeNotFound(target.to_string()))?;
        let ord = self.edges.len();
        self.edge_index.insert(id.clone(), ord);
        self.edges.push(Edge {
            id,
            source: source.to_string(),
            target: target.to_string(),
            label: label.into(),
            props,
        });
        self.endpoints.push((s, t));
        self.out_adj[s].push((ord, t));
        self.in_adj[t].push((ord, s));
        Ok(ord)
    }

    /// Edges incident to node ordinal `v` in the given direction, as
    /// `(edge ordinal, neighbour ordinal)`. For undirected graphs every
    /// direction behaves like [`Direction::Any`].
    pub fn incident(&self, v: usize, dir: Direction) -> Vec<(usize, usize)> {
        let dir = if self.directed { dir } else { Direction::Any };
        match dir {
            Direction::Out => self.out_adj[v].clone(),
            Direction::In => self.in_adj[v].clone(),
            Direction::Any => {
                let mut all = self.out_adj[v].clone();
                // self-loops already appear in out_adj
                all.extend(self.in_adj[v].iter().filter(|(e, _)| {
                    let (s, t) = self.endpoints[*e];
                    s != t
                }));
                all.sort_unstable();
                all
            }
        }
    }

    /// Successor ordinals following edge direction (both ways if undirected),
    /// deduplicated and without self-loops.
    pub fn successors(&self, v: usize) -> Vec<usize> {
        let mut s: Vec<usize> =
            self.incident(v, Direction::Out).into_iter().map(|(_, w)| w).filter(|&w| w != v).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Subgraph induced by the given node ordinals; keeps original order.
    pub fn induced(&self, keep: &BTreeSet<usize>) -> PropertyGraph {
        let mut g = PropertyGraph::new(self.directed);
        for &i in keep {
            let n = &self.nodes[i];
            g.add_node(n.id.clone(), n.label.clone(), n.props.clone()).expect("unique ids");
        }
        for (e, &(s, t)) in self.edges.iter().zip(&self.endpoints) {
            if keep.contains(&s) && keep.contains(&t) {
                g.add_edge(e.id.clone(), &e.source, &e.target, e.label.clone(), e.props.clone())
                    .expect("endpoints kept");
            }
        }
        g
    }

    pub fn induced_by_ids<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> PropertyGraph {
        let keep: BTreeSet<usize> = ids.into_iter().filter_map(|id| self.node_ordinal(id)).collect();
        self.induced(&keep)
    }

    /// Ordinals reachable from `start` within `radius` hops, following
    /// `dir`. `radius = None` means unbounded.
    pub fn reachable(&self, start: usize, dir: Direction, radius: Option<usize>) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        seen.insert(start);
        let mut queue = VecDeque::from([(start, 0usize)]);
        while let Some((v, d)) = queue.pop_front() {
            if radius.is_some_and(|r| d >= r) {
                continue;
            }
            for (_, w) in self.incident(v, dir) {
                if seen.insert(w) {
                    queue.push_back((w, d + 1));
                }
            }
        }
        seen
    }

    /// Content fingerprint over ids, labels, endpoints and properties.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.directed.hash(&mut h);
        for n in &self.nodes {
            (&n.id, &n.label, &n.props).hash(&mut h);
        }
        for e in &self.edges {
            (&e.id, &e.source, &e.target, &e.label, &e.props).hash(&mut h);
        }
        h.finish()
    }

    /// Structural invariant check: endpoints exist, ids unique.
    pub fn check_invariants(&self) -> Result<(), StoreError> {
        let ids: BTreeSet<&str> = self.nodes.iter().map(|n| n.id.as_str()).collect();
        if ids.len() != self.nodes.len() {
            return Err(StoreError::DuplicateId("node".into()));
        }
        let eids: BTreeSet<&str> = self.edges.iter().map(|e| e.id.as_str()).collect();
        if eids.len() != self.edges.len() {
            return Err(StoreError::DuplicateId("edge".into()));
        }
        for e in &self.edges {
            if !ids.contains(e.source.as_str()) || !ids.contains(e.target.as_str()) {
                return Err(StoreError::NodeNotFound(format!("endpoint of {}", e.id)));
            }
        }
        Ok(())
    }
}

/// Induced subgraph of every node within `radius` hops of `node_id`,
/// ignoring edge direction.
pub fn graph_neighborhood(graph: &PropertyGraph, node_id: &str, radius: usize) -> Result<PropertyGraph, StoreError> {
    let start = graph.node_ordinal(node_id).ok_or_else(|| StoreError::NodeNotFound(node_id.to_string()))?;
    let keep = graph.reachable(start, Direction::Any, Some(radius));
    Ok(graph.induced(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path() -> PropertyGraph {
        let mut g = PropertyGraph::new(true);
        for id in ["a", "b", "c"] {
            g.add_node(id, "N", Properties::new()).unwrap();
        }
        g.add_edge("e1", "a", "b", "E", Properties::new()).unwrap();
        g.add_edge("e2", "b", "c", "E", Properties::new()).unwrap();
        g
    }

    #[test]
    fn radius_zero_is_single_node() {
        let n = graph_neighborhood(&path(), "b", 0).unwrap();
        assert_eq!(n.node_count(), 1);
        assert_eq!(n.edge_count(), 0);
    }

    #[test]
    fn radius_one_on_path_ignores_direction() {
        let n = graph_neighborhood(&path(), "b", 1).unwrap();
        assert_eq!(n.node_count(), 3);
        assert_eq!(n.edge_count(), 2);
    }

    #[test]
    fn missing_node() {
        assert!(matches!(graph_neighborhood(&path(), "zz", 1), Err(StoreError::NodeNotFound(_))));
    }

    #[test]
    fn dangling_edge_rejected() {
        let mut g = path();
        assert!(g.add_edge("e3", "a", "q", "E", Properties::new()).is_err());
        assert!(g.add_edge("e1", "a", "c", "E", Properties::new()).is_err());
        g.check_invariants().unwrap();
    }

    #[test]
    fn serde_round_trip() {
        let g = path();
        let s = serde_json::to_string(&g).unwrap();
        let back: PropertyGraph = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
        assert_eq!(back.successors(0), vec![1]);
    }

    fn bfs_oracle(n: usize, edges: &[(usize, usize)], start: usize, r: usize) -> BTreeSet<usize> {
        // distance by repeated relaxation over the undirected edge list
        let mut dist = vec![usize::MAX; n];
        dist[start] = 0;
        for _ in 0..n {
            for &(a, b) in edges {
                if dist[a] != usize::MAX && dist[a] + 1 < dist[b] {
                    dist[b] = dist[a] + 1;
                }
                if dist[b] != usize::MAX && dist[b] + 1 < dist[a] {
                    dist[a] = dist[b] + 1;
                }
            }
        }
        (0..n).filter(|&v| dist[v] <= r).collect()
    }

    proptest! {
        #[test]
        fn neighborhood_matches_bfs_oracle(
            edges in proptest::collection::vec((0usize..20, 0usize..20), 0..45),
            start in 0usize..20,
            radius in 0usize..4,
        ) {
            let mut g = PropertyGraph::new(true);
            for i in 0..20 {
                g.add_node(format!("n{i:02}"), "N", Properties::new()).unwrap();
            }
            for (k, &(a, b)) in edges.iter().enumerate() {
                g.add_edge(format!("e{k}"), &format!("n{a:02}"), &format!("n{b:02}"), "E", Properties::new()).unwrap();
            }
            let sub = graph_neighborhood(&g, &format!("n{start:02}"), radius).unwrap();
            let expected = bfs_oracle(20, &edges, start, radius);
            let got: BTreeSet<usize> = sub.nodes().iter().map(|n| n.id[1..].parse().unwrap()).collect();
            prop_assert_eq!(&got, &expected);
            let expected_edges = edges.iter().filter(|(a, b)| expected.contains(a) && expected.contains(b)).count();
            prop_assert_eq!(sub.edge_count(), expected_edges);
        }
    }
}
