use std::sync::Arc;

use serde_json::{json, Value as Json};
use vantage_cli::{AppState, ServiceConfig};
use vantage_core::{generate_synthetic_corpus, Store, SyntheticConfig};

struct Server {
    base: String,
    client: reqwest::Client,
    _stop: tokio::sync::oneshot::Sender<()>,
}

impl Server {
    async fn start(tweets: usize) -> Server {
        let mut store = Store::new();
        store.insert_records(generate_synthetic_corpus(&SyntheticConfig::walkthrough(tweets), 1).unwrap()).unwrap();
        let state = Arc::new(AppState::from_config(&ServiceConfig::default(), store).unwrap());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
        tokio::spawn(vantage_cli::serve(state, listener, async move {
            let _ = stopped.await;
        }));
        Server { base: format!("http://{addr}"), client: reqwest::Client::new(), _stop: stop }
    }

    async fn send(&self, method: reqwest::Method, path: &str, body: Option<&str>) -> (u16, Json) {
        let mut req = self.client.request(method, format!("{}{path}", self.base));
        if let Some(b) = body {
            req = req.header("content-type", "application/json").body(b.to_string());
        }
        let resp = req.send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap())
    }

    async fn post(&self, path: &str, body: Json) -> (u16, Json) {
        self.send(reqwest::Method::POST, path, Some(&body.to_string())).await
    }

    async fn get(&self, path: &str) -> (u16, Json) {
        self.send(reqwest::Method::GET, path, None).await
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn errors_share_one_shape() {
    let s = Server::start(500).await;
    let (status, body) = s.get("/sessions/s9/tree").await;
    assert_eq!(status, 404);
    assert_eq!(body["code"], "UNKNOWN_SESSION");

    let (status, body) = s.get("/no/such/route").await;
    assert_eq!(status, 404);
    assert_eq!(body["code"], "NOT_FOUND");

    let (status, body) = s.send(reqwest::Method::POST, "/ingest", Some("{not json")).await;
    assert_eq!(status, 400);
    assert!(body["message"].is_string());

    let (status, body) = s.post("/analytics/wizardry", json!({})).await;
    assert_eq!(status, 404);
    assert_eq!(body["code"], "UNKNOWN_OP");

    let (_, created) = s.post("/sessions", json!({})).await;
    let sid = created["session_id"].as_str().unwrap();
    let (status, body) = s.get(&format!("/sessions/{sid}/visuals/99")).await;
    assert_eq!(status, 404);
    assert_eq!(body["code"], "UNKNOWN_VIS_ID");
}

#[tokio::test(flavor = "multi_thread")]
async fn conflict_then_resolution() {
    let s = Server::start(2000).await;
    let (_, created) = s.post("/sessions", json!({})).await;
    let sid = created["session_id"].as_str().unwrap();
    let root = created["tree"]["root"].as_u64().unwrap();

    let (status, bars) = s
        .post(
            &format!("/sessions/{sid}/visuals"),
            json!({"template_id": "hashtag_histogram", "vType": "barChart",
                   "bindings": {"tagset": {"type": "tagset", "value": ["hiv"]}}}),
        )
        .await;
    assert_eq!(status, 200, "{bars}");
    let bars_id = bars["visID"].as_u64().unwrap();
    assert_eq!(bars["parent"], root);

    let (status, _) = s
        .post(
            &format!("/sessions/{sid}/visuals/{bars_id}/interact"),
            json!({"action": "select_bars", "arguments": {"categories": ["aids", "prep"]}}),
        )
        .await;
    assert_eq!(status, 200);

    let derive = format!("/sessions/{sid}/visuals/{bars_id}/derive");
    let (status, conflict) = s.post(&derive, json!({"template_id": "author_heatmap"})).await;
    assert_eq!(status, 409);
    assert_eq!(conflict["code"], "UNRESOLVED_AMBIGUITY");
    let amb = &conflict["detail"]["proposal"]["ambiguities"][0];
    assert_eq!(amb["parameter"], "tagset");
    assert_eq!(amb["candidates"][0]["provenance"], "state");

    let (status, heat) =
        s.post(&derive, json!({"template_id": "author_heatmap", "resolution": {"tagset": {"candidate": 0}}})).await;
    assert_eq!(status, 200, "{heat}");
    let heat_id = heat["visID"].as_u64().unwrap();

    let (_, tree) = s.get(&format!("/sessions/{sid}/tree")).await;
    let node = tree["nodes"].as_array().unwrap().iter().find(|n| n["visID"] == heat_id).unwrap();
    assert_eq!(node["parent"], bars_id);
    assert_eq!(tree["focus"], heat_id);

    // page through the heatmap's rows
    let mut seen = 0;
    let mut cursor = String::new();
    let total = loop {
        let (status, page) = s.get(&format!("/sessions/{sid}/visuals/{heat_id}/data?limit=7{cursor}")).await;
        assert_eq!(status, 200, "{page}");
        seen += page["rows"].as_array().unwrap().len();
        match page["next_cursor"].as_str() {
            Some(c) => cursor = format!("&cursor={c}"),
            None => break page["total"].as_u64().unwrap() as usize,
        }
    };
    assert_eq!(seen, total);

    let (status, archive) = s.get(&format!("/sessions/{sid}/export")).await;
    assert_eq!(status, 200);
    let (status, imported) = s.post("/sessions/import", archive).await;
    assert_eq!(status, 200);
    assert_eq!(imported["tree"]["nodes"], tree["nodes"]);
}
