//! Seeded fixtures shared by the benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vantage_core::store::Properties;
use vantage_core::{generate_synthetic_corpus, PropertyGraph, Store, SyntheticConfig, Value};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random digraph with `n` nodes and `m` edges. Node labels cycle through
/// A/B/C, edge labels alternate X/Y and every node carries an Int `w`.
pub fn random_graph(n: usize, m: usize, seed: u64) -> PropertyGraph {
    let mut r = rng(seed);
    let mut g = PropertyGraph::new(true);
    for i in 0..n {
        let mut p = Properties::new();
        p.insert("w".into(), Value::Int(r.random_range(0..10)));
        g.add_node(format!("n{i}"), ["A", "B", "C"][i % 3], p).unwrap();
    }
    for e in 0..m {
        let (s, t) = (r.random_range(0..n), r.random_range(0..n));
        g.add_edge(format!("e{e}"), &format!("n{s}"), &format!("n{t}"), ["X", "Y"][e % 2], Properties::new()).unwrap();
    }
    g
}

pub fn corpus_store(tweets: usize, seed: u64) -> Store {
    let mut store = Store::new();
    store.insert_records(generate_synthetic_corpus(&SyntheticConfig::walkthrough(tweets), seed).unwrap()).unwrap();
    store
}

/// Two-vocabulary documents of `len` tokens each.
pub fn topic_docs(docs: usize, len: usize, seed: u64) -> Vec<(String, Vec<String>)> {
    let mut r = rng(seed);
    (0..docs)
        .map(|d| {
            let p = if d % 2 == 0 { 'a' } else { 'b' };
            (format!("d{d}"), (0..len).map(|_| format!("{p}{:02}", r.random_range(0..40))).collect())
        })
        .collect()
}
