use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value as Json};

const BIN: &str = env!("CARGO_BIN_EXE_vantage");

fn vantage(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("RUST_LOG", "error").output().expect("binary runs")
}

fn stdout_json(o: &Output) -> Json {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn synth(dir: &Path, tweets: &str) -> String {
    let out = dir.join("corpus.jsonl");
    let o = vantage(&["--seed", "3", "synth", "--tweets", tweets, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(vantage(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(vantage(&["analyze", "bursts", "--window", "many"]).status.code(), Some(1));
    assert_eq!(vantage(&["--help"]).status.code(), Some(0));
}

#[test]
fn ingest_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "800");
    let store = dir.path().join("store.jsonl");
    let store = store.to_str().unwrap();

    let o = vantage(&["--store", store, "ingest", "--input", &corpus]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stats = stdout_json(&o);
    assert!(stats["records_kept"].as_u64().unwrap() >= 800);

    // the same records again are all duplicates
    let o = vantage(&["--store", store, "ingest", "--input", &corpus]);
    assert_eq!(o.status.code(), Some(2));
    let err: Json = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["code"], "EMPTY_CORPUS");

    let o = vantage(&["--store", store, "analyze", "expand", "--seeds", "hiv", "--n", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["expansion"].as_array().unwrap().len(), 3);
}

#[test]
fn data_errors_exit_2() {
    let o = vantage(&["ingest", "--input", "/definitely/not/here.jsonl"]);
    assert_eq!(o.status.code(), Some(2));
    let err: Json = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["code"], "FILE_NOT_FOUND");
}

#[test]
fn script_ambiguity_exits_3_until_resolved() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "2000");
    let script = dir.path().join("script.json");
    std::fs::write(
        &script,
        json!({"steps": [
            {"op": "create", "template_id": "hashtag_histogram", "vType": "barChart",
             "bindings": {"tagset": {"type": "tagset", "value": ["hiv", "aids"]}}, "as": "bars"},
            {"op": "interact", "visual": "bars", "action": "select_bars", "arguments": {"categories": ["prep"]}},
            {"op": "annotate", "visual": "bars", "relation": "bars", "tuples": [{"category": "hiv"}]},
            {"op": "derive", "from": "bars", "template_id": "author_heatmap", "as": "heat"}
        ]})
        .to_string(),
    )
    .unwrap();
    let archive = dir.path().join("session.json");
    let run = |resolve: Option<&Path>| {
        let mut cmd = Command::new(BIN);
        cmd.args(["--store", &corpus, "session", "run-script"]).arg("--script").arg(&script).arg("--out").arg(&archive);
        if let Some(r) = resolve {
            cmd.arg("--resolve").arg(r);
        }
        cmd.output().unwrap()
    };

    let o = run(None);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let unresolved = stdout_json(&o);
    let amb = unresolved["unresolved"]["ambiguities"].as_array().unwrap();
    assert!(amb.iter().any(|a| a["parameter"] == "tagset"));

    let resolve = dir.path().join("resolve.json");
    std::fs::write(&resolve, json!({"heat": {"tagset": {"candidate": 0}}}).to_string()).unwrap();
    let o = run(Some(&resolve));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let done = stdout_json(&o);
    assert_eq!(done["steps"].as_array().unwrap().len(), 4);

    let o = Command::new(BIN)
        .args(["--store", &corpus, "session", "export", "--archive", archive.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["nodes"].as_array().unwrap().len(), 3);
}
