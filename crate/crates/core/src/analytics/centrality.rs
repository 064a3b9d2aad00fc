//! PageRank, betweenness, and influencer detection.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::AnalyticsError;
use crate::store::{Direction, PropertyGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentralityAlgorithm {
    Pagerank,
    Betweenness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityScores {
    pub algorithm: CentralityAlgorithm,
    pub scores: BTreeMap<String, f64>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageRankConfig {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        Self { damping: 0.85, tolerance: 1e-12, max_iterations: 1000 }
    }
}

/// Weighted out-adjacency: `(target, multiplicity)`; undirected edges count
/// both ways.
fn weighted_out(g: &PropertyGraph) -> Vec<BTreeMap<usize, f64>> {
    let mut out = vec![BTreeMap::new(); g.node_count()];
    for &(s, t) in g.endpoints() {
        *out[s].entry(t).or_insert(0.0) += 1.0;
        if !g.is_directed() && s != t {
            *out[t].entry(s).or_insert(0.0) += 1.0;
        }
    }
    out
}

/// Power iteration with uniform teleport; dangling mass is spread
/// uniformly. Stops when the L1 change drops below the tolerance. On
/// hitting the iteration cap, the error carries the last iterate.
pub fn pagerank(g: &PropertyGraph, cfg: &PageRankConfig) -> Result<CentralityScores, AnalyticsError> {
    let n = g.node_count();
    if n == 0 {
        return Err(AnalyticsError::EmptyGraph);
    }
    if !(0.0..1.0).contains(&cfg.damping) {
        return Err(AnalyticsError::InvalidArgument(format!("damping {} not in [0, 1)", cfg.damping)));
    }
    let adj = weighted_out(g);
    let out_w: Vec<f64> = adj.iter().map(|m| m.values().sum()).collect();
    let nf = n as f64;
    let d = cfg.damping;
    let mut x = vec![1.0 / nf; n];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&i| out_w[i] == 0.0).map(|i| x[i]).sum();
        let base = (1.0 - d) / nf + d * dangling / nf;
        let mut next = vec![base; n];
        for (i, targets) in adj.iter().enumerate() {
            if out_w[i] == 0.0 {
                continue;
            }
            let share = d * x[i] / out_w[i];
            for (&j, &w) in targets {
                next[j] += share * w;
            }
        }
        let delta: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if delta < cfg.tolerance {
            converged = true;
            break;
        }
    }
    let total: f64 = x.iter().sum();
    let scores = g.nodes().iter().zip(&x).map(|(node, v)| (node.id.clone(), v / total)).collect();
    let result = CentralityScores { algorithm: CentralityAlgorithm::Pagerank, scores, converged, iterations };
    if converged {
        Ok(result)
    } else {
        Err(AnalyticsError::NoConvergence { iterations, last: result })
    }
}

/// Unnormalized shortest-path betweenness on the collapsed simple graph
/// (multi-edges once, self-loops ignored). For undirected graphs each
/// unordered pair counts once.
pub fn betweenness_raw(g: &PropertyGraph) -> BTreeMap<String, f64> {
    let n = g.node_count();
    let adj: Vec<Vec<usize>> = (0..n).map(|v| g.successors(v)).collect();
    let mut cb = vec![0.0f64; n];
    for s in 0..n {
        let mut stack = Vec::with_capacity(n);
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![-1i64; n];
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &adj[v] {
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut delta = vec![0.0f64; n];
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                cb[w] += delta[w];
            }
        }
    }
    let halve = if g.is_directed() { 1.0 } else { 0.5 };
    g.nodes().iter().zip(cb).map(|(node, c)| (node.id.clone(), c * halve)).collect()
}

/// Betweenness normalized by the number of pairs not involving the node:
/// `(n-1)(n-2)` directed, `(n-1)(n-2)/2` undirected; zero when `n < 3`.
pub fn betweenness(g: &PropertyGraph) -> Result<CentralityScores, AnalyticsError> {
    let n = g.node_count();
    if n == 0 {
        return Err(AnalyticsError::EmptyGraph);
    }
    let raw = betweenness_raw(g);
    let pairs = if n < 3 {
        0.0
    } else {
        let p = ((n - 1) * (n - 2)) as f64;
        if g.is_directed() {
            p
        } else {
            p / 2.0
        }
    };
    let scores = raw.into_iter().map(|(k, v)| (k, if pairs > 0.0 { v / pairs } else { 0.0 })).collect();
    Ok(CentralityScores { algorithm: CentralityAlgorithm::Betweenness, scores, converged: true, iterations: 1 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluencerReport {
    pub influencers: BTreeSet<String>,
    pub percentile: f64,
    /// Set when no node made both top lists and the best rank-sum node was
    /// reported instead.
    pub fallback: bool,
    pub pagerank: CentralityScores,
    pub betweenness: CentralityScores,
    /// Forward-reachability subgraph per influencer.
    pub reachability: BTreeMap<String, PropertyGraph>,
    /// Union of all reachability subgraphs.
    pub combined: PropertyGraph,
}

const TIE_TOLERANCE: f64 = 1e-12;

/// Nodes among the top `m` by score. A node qualifies only if at most `m`
/// nodes score at least as high, so a tie straddling the cut admits
/// nobody from the tie.
pub fn top_fraction(scores: &BTreeMap<String, f64>, m: usize) -> BTreeSet<String> {
    let vals: Vec<f64> = scores.values().copied().collect();
    scores
        .iter()
        .filter(|(_, &s)| vals.iter().filter(|&&o| o >= s - TIE_TOLERANCE).count() <= m)
        .map(|(k, _)| k.clone())
        .collect()
}

/// Competition rank: 1 + number of strictly higher scores.
fn ranks(scores: &BTreeMap<String, f64>) -> BTreeMap<&str, usize> {
    let vals: Vec<f64> = scores.values().copied().collect();
    scores.iter().map(|(k, &s)| (k.as_str(), 1 + vals.iter().filter(|&&o| o > s + TIE_TOLERANCE).count())).collect()
}

/// Nodes in the top `ceil(p * n)` by both PageRank and betweenness, each
/// with the subgraph reachable from it along edge direction.
pub fn influencers(
    g: &PropertyGraph,
    percentile: f64,
    cfg: &PageRankConfig,
) -> Result<InfluencerReport, AnalyticsError> {
    if g.node_count() == 0 {
        return Err(AnalyticsError::EmptyGraph);
    }
    if !(percentile > 0.0 && percentile <= 1.0) {
        return Err(AnalyticsError::InvalidArgument(format!("percentile {percentile} not in (0, 1]")));
    }
    let pr = match pagerank(g, cfg) {
        Ok(s) => s,
        Err(AnalyticsError::NoConvergence { iterations, last }) => {
            warn!("pagerank did not converge after {iterations} iterations; using last iterate");
            last
        }
        Err(e) => return Err(e),
    };
    let bc = betweenness(g)?;
    let m = (percentile * g.node_count() as f64).ceil() as usize;
    let top_pr = top_fraction(&pr.scores, m);
    let top_bc = top_fraction(&bc.scores, m);
    let mut chosen: BTreeSet<String> = top_pr.intersection(&top_bc).cloned().collect();
    let fallback = chosen.is_empty();
    if fallback {
        let rp = ranks(&pr.scores);
        let rb = ranks(&bc.scores);
        let best = rp.iter().map(|(id, r)| (r + rb[id], *id)).min().expect("non-empty graph");
        chosen.insert(best.1.to_string());
    }
    let mut reachability = BTreeMap::new();
    let mut all = BTreeSet::new();
    for id in &chosen {
        let ord = g.node_ordinal(id).expect("scored node exists");
        let reach = g.reachable(ord, Direction::Out, None);
        all.extend(reach.iter().copied());
        reachability.insert(id.clone(), g.induced(&reach));
    }
    Ok(InfluencerReport {
        influencers: chosen,
        percentile,
        fallback,
        pagerank: pr,
        betweenness: bc,
        reachability,
        combined: g.induced(&all),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Properties;

    fn graph(directed: bool, n: usize, edges: &[(usize, usize)]) -> PropertyGraph {
        let mut g = PropertyGraph::new(directed);
        for i in 0..n {
            g.add_node(format!("n{i}"), "N", Properties::new()).unwrap();
        }
        for (k, (s, t)) in edges.iter().enumerate() {
            g.add_edge(format!("e{k}"), &format!("n{s}"), &format!("n{t}"), "E", Properties::new()).unwrap();
        }
        g
    }

    #[test]
    fn cycle_is_uniform() {
        let g = graph(true, 4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let pr = pagerank(&g, &PageRankConfig::default()).unwrap();
        assert!(pr.scores.values().all(|v| (v - 0.25).abs() < 1e-12));
    }

    #[test]
    fn two_sources_one_sink() {
        let g = graph(true, 3, &[(0, 1), (2, 1)]);
        let pr = pagerank(&g, &PageRankConfig::default()).unwrap().scores;
        assert!((pr["n0"] - pr["n2"]).abs() < 1e-12);
        assert!(pr["n0"] < pr["n1"]);
        assert!((pr.values().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn no_convergence_carries_scores() {
        let g = graph(true, 3, &[(0, 1), (1, 2)]);
        let cfg = PageRankConfig { max_iterations: 1, tolerance: 0.0, ..Default::default() };
        match pagerank(&g, &cfg) {
            Err(AnalyticsError::NoConvergence { last, .. }) => {
                assert!(!last.converged);
                assert!((last.scores.values().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn path_betweenness() {
        let g = graph(true, 3, &[(0, 1), (1, 2)]);
        let b = betweenness(&g).unwrap().scores;
        assert_eq!((b["n0"], b["n1"], b["n2"]), (0.0, 0.5, 0.0));
        let u = graph(false, 3, &[(0, 1), (1, 2)]);
        assert_eq!(betweenness(&u).unwrap().scores["n1"], 1.0);
    }

    #[test]
    fn complete_graph_zero_betweenness() {
        let mut e = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    e.push((i, j));
                }
            }
        }
        let b = betweenness(&graph(true, 5, &e)).unwrap();
        assert!(b.scores.values().all(|v| *v == 0.0));
    }

    #[test]
    fn star_center_is_influencer() {
        let mut e = Vec::new();
        for i in 1..10 {
            e.push((0, i));
            e.push((i, 0));
        }
        let r = influencers(&graph(true, 10, &e), 0.2, &PageRankConfig::default()).unwrap();
        assert_eq!(r.influencers, BTreeSet::from(["n0".to_string()]));
        assert!(!r.fallback);
        assert_eq!(r.reachability["n0"].node_count(), 10);
        assert_eq!(r.combined.node_count(), 10);
    }

    #[test]
    fn disjoint_tops_fall_back() {
        // n0 is a sink collecting many links (PageRank top, betweenness 0);
        // n5 bridges two halves (betweenness top).
        let g = graph(true, 9, &[(1, 0), (2, 0), (3, 0), (4, 0), (6, 5), (5, 7), (7, 8), (8, 6), (5, 1)]);
        let r = influencers(&g, 0.1, &PageRankConfig::default()).unwrap();
        let pr_top = top_fraction(&r.pagerank.scores, 1);
        let bc_top = top_fraction(&r.betweenness.scores, 1);
        assert!(pr_top.is_disjoint(&bc_top));
        assert!(r.fallback);
        assert_eq!(r.influencers.len(), 1);
    }

    #[test]
    fn top_fraction_ties() {
        let s: BTreeMap<String, f64> =
            [("a", 1.0), ("b", 1.0), ("c", 0.5)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        assert!(top_fraction(&s, 1).is_empty());
        assert_eq!(top_fraction(&s, 2).len(), 2);
    }
}
