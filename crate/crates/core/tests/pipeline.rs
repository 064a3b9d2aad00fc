use std::io::Write;
use std::sync::Arc;

use vantage_core::explore::{Choice, Resolution};
use vantage_core::ingest::load_corpus;
use vantage_core::store::{MaterializedViewDef, ViewSource};
use vantage_core::{
    generate_synthetic_corpus, DataModel, ExploreError, Granularity, IngestError, ParamValue, Session, Store,
    SyntheticConfig, TemplateCatalog, VType,
};

fn corpus_file(tweets: usize, seed: u64) -> (tempfile::NamedTempFile, usize) {
    let recs = generate_synthetic_corpus(&SyntheticConfig::walkthrough(tweets), seed).unwrap();
    let mut f = tempfile::NamedTempFile::new().unwrap();
    for r in &recs {
        writeln!(f, "{}", r.to_json_line()).unwrap();
    }
    (f, recs.len())
}

fn loaded_store() -> Store {
    let (f, n) = corpus_file(3000, 5);
    let mut store = Store::new();
    store
        .register_view(MaterializedViewDef {
            view_id: "hourly".into(),
            source: ViewSource::TweetCounts { granularity: Granularity::Hour, hashtag: None },
            target_model: DataModel::Timeseries,
            description: String::new(),
        })
        .unwrap();
    let stats = load_corpus(f.path(), None, &mut store).unwrap();
    assert_eq!(stats.records_kept, n);
    assert!(store.index_is_stale());
    store.refresh_views().unwrap();
    assert!(!store.index_is_stale());
    store
}

fn start(store: &Store) -> Session {
    Session::new(Arc::new(TemplateCatalog::builtin()), store).unwrap()
}

#[test]
fn burst_to_heatmap_to_archive() {
    let store = loaded_store();
    let mut s = start(&store);
    let root = s.root();
    let (t0, _) = store.time_span().unwrap();
    let base = Granularity::Hour.bucket(t0);
    s.interact(
        &store,
        root,
        "select_interval",
        &serde_json::json!({"start": base + 150 * 3600, "end": base + 250 * 3600}),
    )
    .unwrap();

    let err =
        s.derive_visual(&store, root, "bursty_hashtags", &Resolution::new(), None, Default::default()).unwrap_err();
    assert!(matches!(err, ExploreError::UnresolvedAmbiguity(ref p) if p == "interval"));

    let res = Resolution::from([("interval".to_string(), Choice::Candidate(0))]);
    let bursty = s.derive_visual(&store, root, "bursty_hashtags", &res, None, Default::default()).unwrap().clone();
    assert_eq!(bursty.v_type, VType::BarChart);
    assert_eq!(bursty.graphic["data"]["values"][0]["category"], "worldaidsday");

    let tags = ParamValue::tagset(["hiv", "aids"]);
    let res = Resolution::from([
        ("tagset".to_string(), Choice::Value(tags)),
        ("expand_n".to_string(), Choice::Value(ParamValue::Integer(5))),
    ]);
    let heat =
        s.derive_visual(&store, bursty.vis_id, "author_heatmap", &res, None, Default::default()).unwrap().clone();
    assert_eq!(heat.v_type, VType::Heatmap);
    assert_eq!(heat.parent, Some(bursty.vis_id));
    let executions = s.executions();

    // same bindings from a backtracked branch reuse the cached result
    s.backtrack(bursty.vis_id).unwrap();
    let again =
        s.derive_visual(&store, bursty.vis_id, "author_heatmap", &res, None, Default::default()).unwrap().clone();
    assert_eq!(again.parameters.dataset, heat.parameters.dataset);
    assert_eq!(s.executions(), executions);
    assert_eq!(s.children(bursty.vis_id).len(), 2);

    let json = s.export_json();
    let mut back = Session::import_json(Arc::new(TemplateCatalog::builtin()), &json).unwrap();
    assert_eq!(back.export(), s.export());
    assert_eq!(back.tree().nodes, s.tree().nodes);

    // datasets come back lazily, one execution per distinct key
    let before = back.executions();
    back.dataset(&store, heat.vis_id).unwrap();
    back.dataset(&store, again.vis_id).unwrap();
    assert_eq!(back.executions(), before + 1);

    let truncated = &json[..json.len() / 2];
    assert!(matches!(
        Session::import_json(Arc::new(TemplateCatalog::builtin()), truncated),
        Err(ExploreError::CorruptArchive(_))
    ));
}

#[test]
fn ingest_filters_and_rejects() {
    let (f, n) = corpus_file(500, 9);
    let mut store = Store::new();
    let kw = vec!["hiv".to_string()];
    let stats = load_corpus(f.path(), Some(&kw), &mut store).unwrap();
    assert!(stats.records_kept > 0 && stats.records_kept < n);
    assert_eq!(stats.records_kept + stats.records_rejected, stats.records_read);

    // reloading the same file adds nothing
    let err = load_corpus(f.path(), Some(&kw), &mut store).unwrap_err();
    assert!(matches!(err, IngestError::EmptyCorpus));

    let missing = f.path().with_extension("missing");
    assert!(matches!(load_corpus(&missing, None, &mut store), Err(IngestError::FileNotFound(_))));
}

#[test]
fn graph_templates_chain_through_graphrefs() {
    let store = loaded_store();
    let mut s = start(&store);
    let root = s.root();
    let tags = Resolution::from([
        ("tagset".to_string(), Choice::Value(ParamValue::tagset(["hiv", "aids", "prep", "worldaidsday"]))),
        ("interval".to_string(), Choice::Omit),
    ]);
    let net = s.derive_visual(&store, root, "author_mention_network", &tags, None, Default::default()).unwrap().clone();
    assert_eq!(net.v_type, VType::LabeledGraph);
    let report =
        s.derive_visual(&store, net.vis_id, "influencer_report", &Resolution::new(), None, Default::default()).unwrap();
    assert_eq!(report.v_type, VType::LabeledGraph);
    let emphasized: Vec<&str> = report.graphic["data"]["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|n| n["emphasis"] == true)
        .filter_map(|n| n["id"].as_str())
        .collect();
    assert!(emphasized.contains(&"u00003"), "{emphasized:?}");
}
