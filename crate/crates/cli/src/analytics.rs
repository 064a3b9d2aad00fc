//! Stateless analytics operations, shared by `POST /analytics/{op}` and
//! `vantage analyze`.

use std::collections::BTreeSet;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Map, Value as Json};
use vantage_core::analytics::{betweenness, cooccurrence_expand, ks_two_sample, pagerank, PageRankConfig};
use vantage_core::queryengine::{Bindings, ComputeCache, ParamValue, TemplateCatalog};
use vantage_core::{Dataset, Store, Table};

use crate::error::ApiError;

pub const OPS: [&str; 8] =
    ["bursts", "bursty_hashtags", "expand", "topics", "centrality", "influencers", "search", "compare"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalArg {
    pub start: i64,
    pub end: i64,
}

fn parse<T: DeserializeOwned>(op: &str, params: &Json) -> Result<T, ApiError> {
    let params = if params.is_null() { json!({}) } else { params.clone() };
    serde_json::from_value(params)
        .map_err(|e| ApiError::new("INVALID_ARGUMENT", format!("{op}: {e}")).with("op", json!(op)))
}

/// Table rows as JSON objects keyed by column name.
pub fn table_rows(t: &Table) -> Vec<Json> {
    t.rows
        .iter()
        .map(|r| {
            let obj: Map<String, Json> = t
                .columns
                .iter()
                .zip(r)
                .map(|(c, v)| (c.name.clone(), serde_json::to_value(v).expect("plain value")))
                .collect();
            Json::Object(obj)
        })
        .collect()
}

fn expect_table(ds: &Dataset) -> Result<&Table, ApiError> {
    ds.as_table().ok_or_else(|| ApiError::new("INTERNAL", format!("expected a table, got {}", ds.model())))
}

struct Binder(Bindings);

impl Binder {
    fn new() -> Self {
        Binder(Bindings::new())
    }
    fn set(&mut self, k: &str, v: ParamValue) -> &mut Self {
        self.0.insert(k.into(), v);
        self
    }
    fn int(&mut self, k: &str, v: usize) -> &mut Self {
        self.set(k, ParamValue::Integer(v as i64))
    }
    fn real(&mut self, k: &str, v: f64) -> &mut Self {
        self.set(k, ParamValue::Real(v))
    }
    fn scope(
        &mut self,
        tagset: &Option<Vec<String>>,
        authorset: &Option<Vec<String>>,
        interval: &Option<IntervalArg>,
    ) -> &mut Self {
        if let Some(t) = tagset {
            self.set("tagset", ParamValue::tagset(t.iter().map(|s| s.trim_start_matches('#').to_lowercase())));
        }
        if let Some(a) = authorset {
            self.set("authorset", ParamValue::authorset(a.iter().cloned()));
        }
        if let Some(iv) = interval {
            self.set("interval", ParamValue::Interval { start: iv.start, end: iv.end });
        }
        self
    }
}

fn window() -> usize {
    25
}
fn tau() -> f64 {
    3.0
}
fn one() -> usize {
    1
}
fn ten() -> usize {
    10
}
fn hour() -> String {
    "hour".into()
}
fn total() -> String {
    "total_tweets".into()
}
fn damping() -> f64 {
    0.85
}
fn percentile() -> f64 {
    0.1
}
fn mentions() -> String {
    "mentions".into()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BurstParams {
    #[serde(default = "total")]
    series: String,
    #[serde(default = "window")]
    window: usize,
    #[serde(default = "tau")]
    tau: f64,
    #[serde(default = "one")]
    min_len: usize,
    #[serde(default = "hour")]
    granularity: String,
    interval: Option<IntervalArg>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BurstyParams {
    #[serde(default = "window")]
    window: usize,
    #[serde(default = "tau")]
    tau: f64,
    #[serde(default = "one")]
    min_len: usize,
    #[serde(default = "ten")]
    k: usize,
    #[serde(default = "hour")]
    granularity: String,
    tagset: Option<Vec<String>>,
    interval: Option<IntervalArg>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpandParams {
    seeds: Vec<String>,
    #[serde(default = "ten")]
    n: usize,
    #[serde(default = "one")]
    min_support: usize,
    interval: Option<IntervalArg>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TopicParams {
    #[serde(default = "five")]
    topics: usize,
    alpha: Option<f64>,
    #[serde(default = "beta")]
    beta: f64,
    #[serde(default = "iterations")]
    iterations: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "ten")]
    top_terms: usize,
    tagset: Option<Vec<String>>,
    authorset: Option<Vec<String>>,
    interval: Option<IntervalArg>,
}

fn five() -> usize {
    5
}
fn beta() -> f64 {
    0.01
}
fn iterations() -> usize {
    500
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CentralityParams {
    #[serde(default = "pr")]
    algorithm: String,
    #[serde(default = "damping")]
    damping: f64,
    #[serde(default = "mentions")]
    graph: String,
    k: Option<usize>,
    tagset: Option<Vec<String>>,
    authorset: Option<Vec<String>>,
    interval: Option<IntervalArg>,
}

fn pr() -> String {
    "pagerank".into()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InfluencerParams {
    #[serde(default = "percentile")]
    percentile: f64,
    #[serde(default = "damping")]
    damping: f64,
    #[serde(default = "mentions")]
    graph: String,
    tagset: Option<Vec<String>>,
    authorset: Option<Vec<String>>,
    interval: Option<IntervalArg>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchParams {
    query: String,
    #[serde(default = "hundred")]
    k: usize,
    interval: Option<IntervalArg>,
}

fn hundred() -> usize {
    100
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareParams {
    a: Vec<f64>,
    b: Vec<f64>,
}

fn network_template(graph: &str) -> Result<&'static str, ApiError> {
    match graph {
        "mentions" => Ok("author_mention_network"),
        "topics" => Ok("author_topic_network"),
        "cooccurrence" => Ok("cooccurrence_network"),
        other => Err(ApiError::new(
            "INVALID_ARGUMENT",
            format!("unknown graph {other}; expected mentions, topics or cooccurrence"),
        )),
    }
}

/// Runs one analytics operation over the current store contents.
pub fn run_op(store: &Store, catalog: &TemplateCatalog, op: &str, params: &Json) -> Result<Json, ApiError> {
    let mut cache = ComputeCache::new();
    let mut run = |id: &str, b: &Binder| cache.run(catalog, id, &b.0, store).map_err(ApiError::from);
    match op {
        "bursts" => {
            let p: BurstParams = parse(op, params)?;
            let mut b = Binder::new();
            b.int("window", p.window).real("tau", p.tau).int("min_len", p.min_len);
            b.set("granularity", ParamValue::String(p.granularity.clone()));
            let tag = match p.series.as_str() {
                "total_tweets" => None,
                s => Some(s.strip_prefix("tag:").unwrap_or(s).to_string()),
            };
            b.scope(&tag.map(|t| vec![t]), &None, &p.interval);
            let (_, ds) = run("burst_intervals", &b)?;
            Ok(json!({"series": p.series, "granularity": p.granularity, "intervals": table_rows(expect_table(&ds)?)}))
        }
        "bursty_hashtags" => {
            let p: BurstyParams = parse(op, params)?;
            let mut b = Binder::new();
            b.int("window", p.window).real("tau", p.tau).int("min_len", p.min_len).int("k", p.k);
            b.set("granularity", ParamValue::String(p.granularity));
            b.scope(&p.tagset, &None, &p.interval);
            let (_, ds) = run("bursty_hashtags", &b)?;
            Ok(json!({"hashtags": table_rows(expect_table(&ds)?)}))
        }
        "expand" => {
            let p: ExpandParams = parse(op, params)?;
            let seeds: BTreeSet<String> = p.seeds.iter().map(|s| s.trim_start_matches('#').to_lowercase()).collect();
            let t = cooccurrence_expand(store, &seeds, p.n, p.min_support, p.interval.map(|i| (i.start, i.end)))?;
            Ok(json!({"seeds": seeds, "expansion": table_rows(&t)}))
        }
        "topics" => {
            let p: TopicParams = parse(op, params)?;
            let mut b = Binder::new();
            b.int("topics", p.topics)
                .real("beta", p.beta)
                .int("iterations", p.iterations)
                .int("top_terms", p.top_terms);
            b.set("seed", ParamValue::Integer(p.seed as i64));
            if let Some(a) = p.alpha {
                b.real("alpha", a);
            }
            b.scope(&p.tagset, &p.authorset, &p.interval);
            let (_, ds) = run("topic_model", &b)?;
            Ok(serde_json::to_value(&*ds).expect("serializable"))
        }
        "centrality" => {
            let p: CentralityParams = parse(op, params)?;
            let mut b = Binder::new();
            b.scope(&p.tagset, &p.authorset, &p.interval);
            let (_, ds) = run(network_template(&p.graph)?, &b)?;
            let g = ds.as_graph().expect("network templates build graphs");
            let scores = match p.algorithm.as_str() {
                "pagerank" => pagerank(g, &PageRankConfig { damping: p.damping, ..Default::default() })?,
                "betweenness" => betweenness(g)?,
                other => {
                    return Err(ApiError::new("INVALID_ARGUMENT", format!("unknown algorithm {other}")));
                }
            };
            let mut ranked: Vec<(&String, &f64)> = scores.scores.iter().collect();
            ranked.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
            ranked.truncate(p.k.unwrap_or(usize::MAX));
            let ranked: Vec<Json> = ranked.into_iter().map(|(n, s)| json!({"node": n, "score": s})).collect();
            Ok(json!({
                "algorithm": scores.algorithm,
                "converged": scores.converged,
                "iterations": scores.iterations,
                "nodes": g.node_count(),
                "scores": ranked,
            }))
        }
        "influencers" => {
            let p: InfluencerParams = parse(op, params)?;
            let mut b = Binder::new();
            b.scope(&p.tagset, &p.authorset, &p.interval);
            let (key, _) = run(network_template(&p.graph)?, &b)?;
            let mut b = Binder::new();
            b.set("graph", ParamValue::Graphref(key)).real("percentile", p.percentile).real("damping", p.damping);
            let (_, ds) = run("influencer_report", &b)?;
            let Dataset::Influence(r) = &*ds else {
                return Err(ApiError::new("INTERNAL", "influencer_report did not produce a report"));
            };
            let reach: Map<String, Json> = r
                .reachability
                .iter()
                .map(|(id, g)| {
                    let nodes: Vec<&str> = g.nodes().iter().map(|n| n.id.as_str()).collect();
                    (id.clone(), json!({"nodes": nodes, "edges": g.edge_count()}))
                })
                .collect();
            Ok(json!({
                "influencers": r.influencers,
                "percentile": r.percentile,
                "fallback": r.fallback,
                "reachability": reach,
                "combined": {"nodes": r.combined.node_count(), "edges": r.combined.edge_count()},
            }))
        }
        "search" => {
            let p: SearchParams = parse(op, params)?;
            let mut b = Binder::new();
            b.set("query", ParamValue::String(p.query)).int("k", p.k);
            b.scope(&None, &None, &p.interval);
            let (_, ds) = run("text_search", &b)?;
            Ok(json!({"hits": table_rows(expect_table(&ds)?)}))
        }
        "compare" => {
            let p: CompareParams = parse(op, params)?;
            Ok(serde_json::to_value(ks_two_sample(&p.a, &p.b)?).expect("serializable"))
        }
        other => {
            Err(ApiError::new("UNKNOWN_OP", format!("unknown analytics operation {other}"))
                .with("available", json!(OPS)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use vantage_core::{generate_synthetic_corpus, SyntheticConfig};

    fn store() -> Store {
        let mut s = Store::new();
        s.insert_records(generate_synthetic_corpus(&SyntheticConfig::walkthrough(3000), 7).unwrap()).unwrap();
        s.refresh_views().unwrap();
        s
    }

    #[test]
    fn ops_dispatch() {
        let s = store();
        let c = TemplateCatalog::builtin();
        let r = run_op(&s, &c, "bursts", &json!({"series": "tag:worldaidsday", "window": 25, "tau": 3})).unwrap();
        assert!(!r["intervals"].as_array().unwrap().is_empty());
        let r = run_op(&s, &c, "expand", &json!({"seeds": ["#HIV"], "n": 3})).unwrap();
        assert_eq!(r["expansion"].as_array().unwrap().len(), 3);
        let r = run_op(&s, &c, "centrality", &json!({"algorithm": "pagerank", "k": 5})).unwrap();
        assert_eq!(r["scores"].as_array().unwrap().len(), 5);
        let r = run_op(&s, &c, "compare", &json!({"a": [1.0, 2.0], "b": [5.0, 6.0]})).unwrap();
        assert!(r.is_object());
    }

    #[test]
    fn bad_params_are_invalid_arguments() {
        let s = store();
        let c = TemplateCatalog::builtin();
        assert_eq!(run_op(&s, &c, "expand", &json!({})).unwrap_err().code, "INVALID_ARGUMENT");
        assert_eq!(run_op(&s, &c, "bursts", &json!({"windw": 3})).unwrap_err().code, "INVALID_ARGUMENT");
        assert_eq!(run_op(&s, &c, "nope", &json!({})).unwrap_err().code, "UNKNOWN_OP");
        assert_eq!(run_op(&s, &c, "bursts", &json!({"window": 4})).unwrap_err().code, "INVALID_ARGUMENT");
    }
}
