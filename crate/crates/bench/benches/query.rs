use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use vantage_bench::{corpus_store, random_graph};
use vantage_core::queryengine::{eval_pattern, parse_pattern};

fn patterns(c: &mut Criterion) {
    let g = random_graph(2_000, 8_000, 4);
    let two_hop = parse_pattern("MATCH (a:A)-[:X]->(b)-[:Y]->(c:C) WHERE a.w > 5 RETURN a, c").unwrap();
    let one_hop = parse_pattern("MATCH (a)-[]-(b:B) RETURN a, b").unwrap();
    c.bench_function("pattern/two_hop", |b| b.iter(|| eval_pattern(black_box(&two_hop), &g)));
    c.bench_function("pattern/one_hop_undirected", |b| b.iter(|| eval_pattern(black_box(&one_hop), &g)));
}

fn text_search(c: &mut Criterion) {
    let store = corpus_store(20_000, 5);
    let index = store.text_index();
    c.bench_function("search/and", |b| b.iter(|| index.search(black_box("hiv prep")).unwrap()));
    c.bench_function("search/or_not", |b| b.iter(|| index.search(black_box("hiv OR aids -prep")).unwrap()));
    c.bench_function("search/phrase", |b| b.iter(|| index.search(black_box("\"world aids day\"")).unwrap()));
}

criterion_group!(benches, patterns, text_search);
criterion_main!(benches);
