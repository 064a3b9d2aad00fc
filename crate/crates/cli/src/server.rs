//! HTTP+JSON facade over the store, the template catalog and exploration
//! sessions.
//!
//! Ingestion and view refresh take the store's writer lock. Session
//! operations hold the session's mutex (FIFO) and a store read lock, so
//! distinct sessions run concurrently and one session's requests queue.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json_};
use tokio::sync::{Mutex, RwLock};
use vantage_core::explore::{Fields, Resolution, Tuple, VisualSource};
use vantage_core::ingest::{load_corpus, parse_corpus, CorpusStats};
use vantage_core::queryengine::Bindings;
use vantage_core::store::{MaterializedViewDef, RefreshReport, ViewSource};
use vantage_core::{Dataset, ExploreError, Granularity, Session, SessionArchive, Store, TemplateCatalog, VType};

use crate::analytics;
use crate::error::ApiError;
use crate::paging::{page, Page, PageQuery};

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Startup configuration of a service instance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default)]
    pub bind: Option<String>,
    #[serde(default)]
    pub corpus: Vec<PathBuf>,
    /// Template catalog file; the built-in catalog when absent.
    #[serde(default)]
    pub templates: Option<PathBuf>,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub count_retweets: Option<bool>,
    /// Replaces the default materialized views.
    #[serde(default)]
    pub views: Option<Vec<MaterializedViewDef>>,
}

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

pub fn default_views() -> Vec<MaterializedViewDef> {
    let def = |id: &str, source: ViewSource, description: &str| MaterializedViewDef {
        view_id: id.into(),
        target_model: source.model(),
        source,
        description: description.into(),
    };
    vec![
        def(
            "hourly_tweets",
            ViewSource::TweetCounts { granularity: Granularity::Hour, hashtag: None },
            "tweets per hour",
        ),
        def("hashtag_counts", ViewSource::HashtagCounts, "tweets per hashtag"),
        def("cooccurrence", ViewSource::Cooccurrence { min_count: 2 }, "hashtag pairs sharing a tweet"),
        def(
            "author_activity",
            ViewSource::GroupCount { table: "hashtag_use".into(), by: vec!["author_id".into(), "hashtag".into()] },
            "tweets per author and hashtag",
        ),
    ]
}

pub fn load_catalog(path: Option<&std::path::Path>) -> Result<TemplateCatalog, ApiError> {
    match path {
        None => Ok(TemplateCatalog::builtin()),
        Some(p) => {
            let s = std::fs::read_to_string(p)
                .map_err(|e| ApiError::new("FILE_NOT_FOUND", format!("{}: {e}", p.display())))?;
            Ok(TemplateCatalog::from_json(&s)?)
        }
    }
}

/// Loads the configured corpora into `preloaded`, registers the views and
/// refreshes them, so the store is ready to serve.
pub fn build_store(cfg: &ServiceConfig, preloaded: Store) -> Result<(Store, TemplateCatalog), ApiError> {
    let catalog = load_catalog(cfg.templates.as_deref())?;
    let mut store = preloaded;
    if let Some(on) = cfg.count_retweets {
        store.set_count_retweets(on);
    }
    for v in cfg.views.clone().unwrap_or_else(default_views) {
        store.register_view(v)?;
    }
    let kw = (!cfg.keywords.is_empty()).then_some(cfg.keywords.as_slice());
    for path in &cfg.corpus {
        let stats = load_corpus(path, kw, &mut store)?;
        log::info!("loaded {}: {} records kept", path.display(), stats.records_kept);
    }
    store.refresh_views()?;
    Ok((store, catalog))
}

pub struct AppState {
    pub store: RwLock<Store>,
    pub catalog: Arc<TemplateCatalog>,
    sessions: std::sync::Mutex<BTreeMap<String, Arc<Mutex<Session>>>>,
    next_session: AtomicU64,
}

impl AppState {
    pub fn new(store: Store, catalog: TemplateCatalog) -> Self {
        AppState {
            store: RwLock::new(store),
            catalog: Arc::new(catalog),
            sessions: std::sync::Mutex::new(BTreeMap::new()),
            next_session: AtomicU64::new(1),
        }
    }

    pub fn from_config(cfg: &ServiceConfig, preloaded: Store) -> Result<Self, ApiError> {
        let (store, catalog) = build_store(cfg, preloaded)?;
        Ok(Self::new(store, catalog))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions.lock().expect("session map lock").get(id).cloned().ok_or_else(|| ApiError::unknown_session(id))
    }

    fn add_session(&self, s: Session) -> String {
        let id = format!("s{}", self.next_session.fetch_add(1, Ordering::SeqCst));
        self.sessions.lock().expect("session map lock").insert(id.clone(), Arc::new(Mutex::new(s)));
        id
    }
}

fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(serde_json::from_str("{}")?);
    }
    Ok(serde_json::from_slice(bytes)?)
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IngestRequest {
    path: Option<PathBuf>,
    records: Option<Vec<Json_>>,
    #[serde(default)]
    keywords: Vec<String>,
    #[serde(default = "yes")]
    refresh: bool,
}

#[derive(Serialize)]
struct IngestResponse {
    stats: CorpusStats,
    refresh: Option<RefreshReport>,
}

async fn ingest(State(app): State<Arc<AppState>>, raw: Bytes) -> ApiResult<IngestResponse> {
    let req: IngestRequest = body(&raw)?;
    let kw = (!req.keywords.is_empty()).then_some(req.keywords.as_slice());
    let mut store = app.store.write().await;
    let stats = match (req.path, req.records) {
        (Some(p), None) => load_corpus(&p, kw, &mut store)?,
        (None, Some(records)) => {
            let lines: Vec<String> = records.iter().map(Json_::to_string).collect();
            let (kept, stats) = parse_corpus(&lines.join("\n"), kw, |id| store.contains_tweet(id));
            if kept.is_empty() {
                return Err(vantage_core::IngestError::EmptyCorpus.into());
            }
            store.insert_records(kept)?;
            stats
        }
        _ => return Err(ApiError::bad_request("give exactly one of path or records")),
    };
    let refresh = if req.refresh { Some(store.refresh_views()?) } else { None };
    Ok(Json(IngestResponse { stats, refresh }))
}

async fn refresh_views(State(app): State<Arc<AppState>>) -> ApiResult<RefreshReport> {
    Ok(Json(app.store.write().await.refresh_views()?))
}

async fn health(State(app): State<Arc<AppState>>) -> Json<Json_> {
    let store = app.store.read().await;
    let status = if store.index_is_stale() { "stale" } else { "ready" };
    Json(json!({"status": status, "views": store.views().len(), "generation": store.generation()}))
}

async fn templates(State(app): State<Arc<AppState>>) -> Json<TemplateCatalog> {
    Json((*app.catalog).clone())
}

async fn create_session(State(app): State<Arc<AppState>>) -> ApiResult<Json_> {
    let store = app.store.read().await;
    let s = Session::new(app.catalog.clone(), &store)?;
    let tree = s.tree();
    let id = app.add_session(s);
    Ok(Json(json!({"session_id": id, "tree": tree})))
}

async fn tree(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json_> {
    let s = app.session(&id)?;
    let s = s.lock().await;
    Ok(Json(json!(s.tree())))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateVisual {
    template_id: Option<String>,
    #[serde(default)]
    bindings: Bindings,
    dataset_key: Option<String>,
    dataset: Option<Dataset>,
    #[serde(default, rename = "vType", alias = "vtype")]
    v_type: Option<VType>,
    #[serde(default)]
    fields: Fields,
}

async fn create_visual(State(app): State<Arc<AppState>>, Path(id): Path<String>, raw: Bytes) -> ApiResult<Json_> {
    let req: CreateVisual = body(&raw)?;
    let source = match (req.template_id, req.dataset_key, req.dataset) {
        (Some(template_id), None, None) => VisualSource::Template { template_id, bindings: req.bindings },
        (None, Some(k), None) => VisualSource::Key(k),
        (None, None, Some(d)) => VisualSource::Dataset(d),
        _ => return Err(ApiError::bad_request("give exactly one of template_id, dataset_key or dataset")),
    };
    let s = app.session(&id)?;
    let mut s = s.lock().await;
    let store = app.store.read().await;
    let v = s.create_visual(&store, source, req.v_type, req.fields)?;
    Ok(Json(json!(v)))
}

async fn get_visual(State(app): State<Arc<AppState>>, Path((id, vis)): Path<(String, u64)>) -> ApiResult<Json_> {
    let s = app.session(&id)?;
    let s = s.lock().await;
    Ok(Json(json!(s.visual(vis)?)))
}

async fn visual_data(
    State(app): State<Arc<AppState>>,
    Path((id, vis)): Path<(String, u64)>,
    Query(q): Query<PageQuery>,
) -> ApiResult<Page> {
    let s = app.session(&id)?;
    let mut s = s.lock().await;
    let store = app.store.read().await;
    let ds = s.dataset(&store, vis)?;
    Ok(Json(page(&ds, &q)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InteractRequest {
    action: String,
    #[serde(default)]
    arguments: Json_,
}

async fn interact(
    State(app): State<Arc<AppState>>,
    Path((id, vis)): Path<(String, u64)>,
    raw: Bytes,
) -> ApiResult<Json_> {
    let req: InteractRequest = body(&raw)?;
    let args = if req.arguments.is_null() { json!({}) } else { req.arguments };
    let s = app.session(&id)?;
    let mut s = s.lock().await;
    let store = app.store.read().await;
    Ok(Json(json!(s.interact(&store, vis, &req.action, &args)?)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotateRequest {
    relation: String,
    tuples: Vec<Tuple>,
    label: Option<String>,
}

async fn annotate(
    State(app): State<Arc<AppState>>,
    Path((id, vis)): Path<(String, u64)>,
    raw: Bytes,
) -> ApiResult<Json_> {
    let req: AnnotateRequest = body(&raw)?;
    let s = app.session(&id)?;
    let mut s = s.lock().await;
    Ok(Json(json!(s.annotate(vis, &req.relation, req.tuples, req.label)?)))
}

async fn annotations(State(app): State<Arc<AppState>>, Path((id, vis)): Path<(String, u64)>) -> ApiResult<Json_> {
    let s = app.session(&id)?;
    let s = s.lock().await;
    s.visual(vis)?;
    Ok(Json(json!(s.annotations_of(vis))))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DeriveRequest {
    template_id: String,
    #[serde(default)]
    resolution: Resolution,
    #[serde(default, rename = "vType", alias = "vtype")]
    v_type: Option<VType>,
    #[serde(default)]
    fields: Fields,
}

async fn derive(
    State(app): State<Arc<AppState>>,
    Path((id, vis)): Path<(String, u64)>,
    raw: Bytes,
) -> ApiResult<Json_> {
    let req: DeriveRequest = body(&raw)?;
    let s = app.session(&id)?;
    let mut s = s.lock().await;
    let store = app.store.read().await;
    match s.derive_visual(&store, vis, &req.template_id, &req.resolution, req.v_type, req.fields) {
        Ok(v) => Ok(Json(json!(v))),
        Err(e @ ExploreError::UnresolvedAmbiguity(_)) => {
            let proposal = s.propose_bindings(&store, vis, &req.template_id)?;
            Err(ApiError::from(e).with("proposal", json!(proposal)))
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProposalRequest {
    template_id: String,
}

async fn proposal(
    State(app): State<Arc<AppState>>,
    Path((id, vis)): Path<(String, u64)>,
    raw: Bytes,
) -> ApiResult<Json_> {
    let req: ProposalRequest = body(&raw)?;
    let s = app.session(&id)?;
    let mut s = s.lock().await;
    let store = app.store.read().await;
    Ok(Json(json!(s.propose_bindings(&store, vis, &req.template_id)?)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FocusRequest {
    #[serde(rename = "visID")]
    vis_id: u64,
}

async fn focus(State(app): State<Arc<AppState>>, Path(id): Path<String>, raw: Bytes) -> ApiResult<Json_> {
    let req: FocusRequest = body(&raw)?;
    let s = app.session(&id)?;
    let mut s = s.lock().await;
    s.backtrack(req.vis_id)?;
    Ok(Json(json!(s.tree())))
}

async fn export(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<SessionArchive> {
    let s = app.session(&id)?;
    let s = s.lock().await;
    Ok(Json(s.export()))
}

async fn import(State(app): State<Arc<AppState>>, raw: Bytes) -> ApiResult<Json_> {
    let archive: SessionArchive = body(&raw)?;
    let s = Session::import(app.catalog.clone(), archive)?;
    let tree = s.tree();
    let id = app.add_session(s);
    Ok(Json(json!({"session_id": id, "tree": tree})))
}

async fn run_analytics(State(app): State<Arc<AppState>>, Path(op): Path<String>, raw: Bytes) -> ApiResult<Json_> {
    let params: Json_ = body(&raw)?;
    let store = app.store.read().await;
    Ok(Json(analytics::run_op(&store, &app.catalog, &op, &params)?))
}

async fn not_found() -> ApiError {
    ApiError::new("NOT_FOUND", "no such endpoint")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/templates", get(templates))
        .route("/ingest", post(ingest))
        .route("/views/refresh", post(refresh_views))
        .route("/analytics/{op}", post(run_analytics))
        .route("/sessions", post(create_session))
        .route("/sessions/import", post(import))
        .route("/sessions/{id}/tree", get(tree))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/focus", post(focus))
        .route("/sessions/{id}/visuals", post(create_visual))
        .route("/sessions/{id}/visuals/{vis}", get(get_visual))
        .route("/sessions/{id}/visuals/{vis}/data", get(visual_data))
        .route("/sessions/{id}/visuals/{vis}/interact", post(interact))
        .route("/sessions/{id}/visuals/{vis}/annotations", post(annotate).get(annotations))
        .route("/sessions/{id}/visuals/{vis}/derive", post(derive))
        .route("/sessions/{id}/visuals/{vis}/proposal", post(proposal))
        .fallback(not_found)
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    state: Arc<AppState>,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}
