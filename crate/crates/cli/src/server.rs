//! HTTP API over one audited app, plus static UI assets.
//!
//! The graph is frozen and shared. All audit-state mutations take the
//! state's write lock for their whole duration, so there is exactly one
//! writer at a time and readers always see a complete state.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use graphaudit::analyze::{AnalysisContext, AnalyzerError, Category, Registry};
use graphaudit::audit::{
    graph_hash, schedule_and_run, smart_view, AuditError, AuditState, RunRecord, SmartViewKind, SmartViewRequest,
    Steps, WorkItem, WorkItemFilter, WorkItemPatch,
};
use graphaudit::frontend::GraphDocument;
use graphaudit::graph::tags;
use graphaudit::index::{Schedule, BUILTIN_INDEXERS};
use graphaudit::query::{eval_query, parse_query};
use graphaudit::{ElementId, NodeId, ProgramGraph};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::commands::{ingest_config, STATE_FILE};
use crate::config::AuditConfig;
use crate::error::CliError;

const INDEX_HTML: &str = include_str!("../assets/index.html");

#[derive(Debug)]
struct Inner {
    state: AuditState,
    /// Latest record per analyzer.
    status: BTreeMap<String, RunRecord>,
}

/// One app under audit.
pub struct Session {
    pub app: String,
    pub graph: Arc<ProgramGraph>,
    pub context: AnalysisContext,
    pub registry: Registry,
    pub analyzers: Vec<String>,
    pub warnings: Vec<String>,
    /// Input texts by the path recorded in node spans.
    sources: BTreeMap<String, String>,
    state_path: Option<PathBuf>,
    assets: Option<PathBuf>,
    inner: RwLock<Inner>,
    running: AtomicBool,
}

impl Session {
    fn build(
        app: String,
        context: AnalysisContext,
        analyzers: Vec<String>,
        warnings: Vec<String>,
        sources: BTreeMap<String, String>,
        state: AuditState,
    ) -> Self {
        let status = latest(&state.run_log);
        Session {
            app,
            graph: Arc::clone(&context.graph),
            context,
            registry: Registry::builtin(),
            analyzers,
            warnings,
            sources,
            state_path: None,
            assets: None,
            inner: RwLock::new(Inner { state, status }),
            running: AtomicBool::new(false),
        }
    }

    /// Ingests the config. An existing `state.json` in the output directory
    /// is resumed (and must match the graph); otherwise the configured
    /// analyzers run first.
    pub fn from_config(config: &AuditConfig, state_path: Option<PathBuf>) -> Result<Self, CliError> {
        let ingested = ingest_config(config, Schedule::Canonical)?;
        let inputs = config.inputs()?;
        let mut sources: BTreeMap<String, String> =
            inputs.sources.iter().map(|s| (s.path.clone(), s.text.clone())).collect();
        for f in inputs.layouts.iter().chain(&inputs.manifest).chain(&inputs.permission_map) {
            sources.insert(f.path.clone(), f.text.clone());
        }
        let state_path = state_path.unwrap_or_else(|| config.out.join(STATE_FILE));
        let warnings = ingested.warnings.iter().map(|w| w.0.clone()).collect();
        let state = if state_path.exists() {
            AuditState::load(&state_path, &ingested.graph)?
        } else {
            AuditState::new(&config.app, &ingested.graph)
        };
        let fresh = !state_path.exists();
        let mut session = Session::build(
            config.app.clone(),
            ingested.context,
            config.analyzers.clone(),
            warnings,
            sources,
            state,
        );
        session.state_path = Some(state_path);
        session.assets = config.assets.clone();
        if fresh {
            session.run_analyzers(&[])?;
        }
        Ok(session)
    }

    /// A session over an exported graph. Indexing is assumed complete;
    /// source excerpts are unavailable.
    pub fn from_graph(app: &str, graph: Arc<ProgramGraph>, state: Option<AuditState>, state_path: Option<PathBuf>) -> Self {
        let mut context = AnalysisContext::new(graph);
        context.completed = BUILTIN_INDEXERS.iter().map(|s| (*s).to_owned()).collect();
        let fresh = state.is_none();
        let state = state.unwrap_or_else(|| AuditState::new(app, &context.graph));
        let mut session = Session::build(app.to_owned(), context, Vec::new(), Vec::new(), BTreeMap::new(), state);
        session.state_path = state_path;
        if fresh {
            // Builtin analyzers over an indexed graph cannot form a cycle.
            let _ = session.run_analyzers(&[]);
        }
        session
    }

    pub fn with_assets(mut self, assets: Option<PathBuf>) -> Self {
        if assets.is_some() {
            self.assets = assets;
        }
        self
    }

    pub fn state(&self) -> AuditState {
        self.inner.read().state.clone()
    }

    /// Runs `names` (all configured analyzers when empty) and records the
    /// outcome. Fails with 409 semantics when another run is in progress.
    pub fn run_analyzers(&self, names: &[String]) -> Result<Vec<RunRecord>, AuditError> {
        let names = if names.is_empty() { self.analyzers.clone() } else { names.to_vec() };
        let run = schedule_and_run(&self.registry, &names, &self.context, Schedule::Canonical)?;
        let mut inner = self.inner.write();
        inner.state.record_run(&run);
        for r in &run.log {
            inner.status.insert(r.analyzer.clone(), r.clone());
        }
        self.persist(&inner.state);
        Ok(run.log)
    }

    fn persist(&self, state: &AuditState) {
        if let Some(path) = &self.state_path {
            if let Err(e) = state.save(path) {
                log::error!("could not save audit state: {e}");
            }
        }
    }

    /// Applies `f` under the write lock and saves the result.
    fn mutate<T>(&self, f: impl FnOnce(&mut AuditState) -> Result<T, AuditError>) -> Result<T, AuditError> {
        let mut inner = self.inner.write();
        let out = f(&mut inner.state)?;
        self.persist(&inner.state);
        Ok(out)
    }
}

fn latest(log: &[RunRecord]) -> BTreeMap<String, RunRecord> {
    log.iter().map(|r| (r.analyzer.clone(), r.clone())).collect()
}

// ---------------------------------------------------------------------------
// errors

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    detail: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            detail: Value::Null,
        }
    }

    fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.code, "message": self.message, "detail": self.detail });
        (self.status, Json(body)).into_response()
    }
}

impl From<AuditError> for ApiError {
    fn from(e: AuditError) -> Self {
        let message = e.to_string();
        match e {
            AuditError::UnknownWorkItem(id) => {
                ApiError::not_found("unknown_work_item", message).with_detail(json!({ "id": id }))
            }
            AuditError::UnknownNode(id) => ApiError::not_found("unknown_node", message).with_detail(json!({ "id": id })),
            AuditError::UnknownArtifact(id) => {
                ApiError::bad_request("unknown_artifact", message).with_detail(json!({ "id": id }))
            }
            AuditError::EmptySelection => ApiError::bad_request("empty_selection", message),
            AuditError::InvalidSteps(s) => ApiError::bad_request("invalid_steps", message).with_detail(json!({ "steps": s })),
            AuditError::DependencyCycle(cycle) => {
                ApiError::new(StatusCode::CONFLICT, "dependency_cycle", message).with_detail(json!({ "cycle": cycle }))
            }
            AuditError::HashMismatch { expected, found } => ApiError::new(StatusCode::CONFLICT, "hash_mismatch", message)
                .with_detail(json!({ "expected": expected, "found": found })),
            AuditError::Analyzer(AnalyzerError::UnknownAnalyzer(name)) => {
                ApiError::bad_request("unknown_analyzer", message).with_detail(json!({ "name": name }))
            }
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message),
        }
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::bad_request("invalid_body", e.body_text()))
}

type ApiResult = Result<Json<Value>, ApiError>;

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("API values serialize")
}

// ---------------------------------------------------------------------------
// handlers

type Shared = State<Arc<Session>>;

fn count_kinds<'a>(kinds: impl Iterator<Item = Option<&'a str>>) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for k in kinds {
        *out.entry(k.unwrap_or("?").to_owned()).or_insert(0) += 1;
    }
    out
}

async fn graph_summary(State(s): Shared) -> ApiResult {
    let g = &s.graph;
    let entry: Vec<NodeId> = g.nodes_tagged(tags::ENTRY_POINT).map(|n| n.id).collect();
    Ok(Json(json!({
        "app": s.app,
        "graphHash": graph_hash(g),
        "nodes": g.node_count(),
        "edges": g.edge_count(),
        "nodeKinds": count_kinds(g.nodes().map(|n| n.kind())),
        "edgeKinds": count_kinds(g.edges().map(|e| e.kind())),
        "entryPoints": entry,
        "warnings": s.warnings,
    })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryBody {
    script: String,
}

async fn run_query(State(s): Shared, payload: Result<Json<QueryBody>, JsonRejection>) -> ApiResult {
    let q = body(payload)?;
    let script = parse_query(&q.script).map_err(|e| {
        ApiError::bad_request("syntax_error", e.to_string()).with_detail(json!({
            "offset": e.offset, "line": e.line, "column": e.column, "reason": e.message,
        }))
    })?;
    let sub = eval_query(&script, &s.graph);
    Ok(Json(json!({
        "empty": sub.is_empty(),
        "nodes": sub.nodes().len(),
        "edges": sub.edges().len(),
        "subgraph": GraphDocument::of_subgraph(&sub),
    })))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RunBody {
    #[serde(default)]
    names: Vec<String>,
}

async fn run_analyzers(State(s): Shared, payload: Option<Json<RunBody>>) -> ApiResult {
    let names = payload.map(|Json(b)| b.names).unwrap_or_default();
    if s.running.swap(true, Ordering::SeqCst) {
        return Err(ApiError::new(StatusCode::CONFLICT, "run_in_progress", "an analyzer run is already in progress"));
    }
    let session = Arc::clone(&s);
    let result = tokio::task::spawn_blocking(move || session.run_analyzers(&names)).await;
    s.running.store(false, Ordering::SeqCst);
    let log = result.map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    let inner = s.inner.read();
    let items: Vec<Value> = inner.state.work_items.iter().map(|w| item_view(&s.graph, w)).collect();
    Ok(Json(json!({ "runLog": log, "workItems": items })))
}

async fn analyzer_status(State(s): Shared) -> ApiResult {
    let inner = s.inner.read();
    let rows: Vec<Value> = s
        .registry
        .names()
        .map(|name| {
            let d = s.registry.descriptor(name).expect("listed analyzers exist");
            let mut row = to_value(&d);
            let run = inner.status.get(name);
            row["status"] = run.map_or(json!("pending"), |r| to_value(&r.status));
            row["findings"] = json!(run.map_or(0, |r| r.findings));
            row["startUs"] = json!(run.map(|r| r.start_us));
            row["endUs"] = json!(run.map(|r| r.end_us));
            row["error"] = json!(run.and_then(|r| r.error.clone()));
            row
        })
        .collect();
    Ok(Json(json!({ "running": s.running.load(Ordering::SeqCst), "analyzers": rows })))
}

fn item_view(graph: &Arc<ProgramGraph>, item: &WorkItem) -> Value {
    let mut v = to_value(item);
    v["effective"] = to_value(&GraphDocument::of_subgraph(&item.effective(graph)));
    v
}

async fn list_items(State(s): Shared, Query(q): Query<HashMap<String, String>>) -> ApiResult {
    let mut filter = WorkItemFilter::default();
    for (k, v) in &q {
        match k.as_str() {
            "category" if !v.is_empty() => {
                filter.category = Some(Category::from_str(v).map_err(|m| ApiError::bad_request("invalid_category", m))?)
            }
            "reviewed" if !v.is_empty() => {
                filter.reviewed = Some(v.parse().map_err(|_| {
                    ApiError::bad_request("invalid_reviewed", format!("reviewed must be true or false, got `{v}`"))
                })?)
            }
            "category" | "reviewed" => {}
            other => return Err(ApiError::bad_request("unknown_parameter", format!("unknown parameter `{other}`"))),
        }
    }
    let inner = s.inner.read();
    let items: Vec<Value> = inner.state.list(&filter).into_iter().map(|w| item_view(&s.graph, w)).collect();
    Ok(Json(json!({ "workItems": items })))
}

async fn patch_item(
    State(s): Shared,
    Path(id): Path<String>,
    payload: Result<Json<WorkItemPatch>, JsonRejection>,
) -> ApiResult {
    let p = body(payload)?;
    let item = s.mutate(|st| st.patch(&id, &p).cloned())?;
    Ok(Json(item_view(&s.graph, &item)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ArtifactBody {
    #[serde(default)]
    add: Vec<String>,
    #[serde(default)]
    remove: Vec<String>,
}

fn parse_ids(raw: &[String]) -> Result<Vec<ElementId>, ApiError> {
    raw.iter()
        .map(|r| ElementId::from_str(r).map_err(|m| ApiError::bad_request("invalid_id", m).with_detail(json!({ "id": r }))))
        .collect()
}

async fn edit_artifacts(
    State(s): Shared,
    Path(id): Path<String>,
    payload: Result<Json<ArtifactBody>, JsonRejection>,
) -> ApiResult {
    let b = body(payload)?;
    let (add, remove) = (parse_ids(&b.add)?, parse_ids(&b.remove)?);
    let graph = Arc::clone(&s.graph);
    let item = s.mutate(|st| st.edit_artifacts(&graph, &id, &add, &remove).cloned())?;
    Ok(Json(item_view(&s.graph, &item)))
}

fn parse_nodes(raw: &str) -> Result<Vec<NodeId>, ApiError> {
    raw.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            NodeId::from_str(t)
                .map_err(|_| ApiError::bad_request("invalid_id", format!("`{t}` is not a node id")).with_detail(json!({ "id": t })))
        })
        .collect()
}

async fn smartview(State(s): Shared, Query(q): Query<HashMap<String, String>>) -> ApiResult {
    let selection = parse_nodes(q.get("node").map(String::as_str).unwrap_or(""))?;
    let kind_raw = q
        .get("kind")
        .ok_or_else(|| ApiError::bad_request("missing_kind", "the `kind` parameter is required"))?;
    let kind = SmartViewKind::from_str(kind_raw).map_err(|m| ApiError::bad_request("invalid_kind", m))?;
    let steps = match q.get("steps") {
        Some(raw) if !raw.is_empty() => Steps::from_str(raw)?,
        _ => Steps::Fixpoint,
    };
    let feasible_only = q.get("feasible").is_some_and(|v| v == "true");
    let mut req = SmartViewRequest::new(selection.clone(), kind);
    req.steps = steps;
    req.feasible_only = feasible_only;
    let sub = smart_view(&s.graph, &req)?;
    Ok(Json(json!({
        "kind": kind,
        "steps": steps.to_string(),
        "selection": selection,
        "subgraph": GraphDocument::of_subgraph(&sub),
    })))
}

/// The whole lines covering `start..end`, and the 1-based first line.
fn excerpt(text: &str, start: usize, end: usize) -> (usize, &str) {
    let start = start.min(text.len());
    let end = end.clamp(start, text.len());
    let from = text[..start].rfind('\n').map_or(0, |i| i + 1);
    let to = text[end..].find('\n').map_or(text.len(), |i| end + i);
    (text[..from].matches('\n').count() + 1, &text[from..to])
}

async fn source(State(s): Shared, Query(q): Query<HashMap<String, String>>) -> ApiResult {
    let raw = q
        .get("node")
        .ok_or_else(|| ApiError::bad_request("missing_node", "the `node` parameter is required"))?;
    let id = NodeId::from_str(raw).map_err(|_| ApiError::bad_request("invalid_id", format!("`{raw}` is not a node id")))?;
    let node = s
        .graph
        .node(id)
        .ok_or_else(|| ApiError::not_found("unknown_node", format!("unknown node `{raw}`")))?;
    let span = node
        .span
        .as_ref()
        .ok_or_else(|| ApiError::not_found("no_source", format!("node `{raw}` has no source location")))?;
    let text = s
        .sources
        .get(&span.path)
        .ok_or_else(|| ApiError::not_found("source_unavailable", format!("source `{}` is not loaded", span.path)))?;
    let (line, excerpt) = excerpt(text, span.start, span.end);
    Ok(Json(json!({
        "node": id,
        "path": span.path,
        "span": { "start": span.start, "end": span.end },
        "line": line,
        "text": excerpt,
    })))
}

async fn api_not_found() -> ApiError {
    ApiError::not_found("not_found", "no such API route")
}

async fn index_page() -> Html<&'static str> {
    Html(INDEX_HTML)
}

pub fn router(session: Arc<Session>) -> Router {
    let api = Router::new()
        .route("/graph/summary", get(graph_summary))
        .route("/query", post(run_query))
        .route("/analyzers/run", post(run_analyzers))
        .route("/analyzers/status", get(analyzer_status))
        .route("/workitems", get(list_items))
        .route("/workitems/{id}", patch(patch_item))
        .route("/workitems/{id}/artifacts", post(edit_artifacts))
        .route("/smartview", get(smartview))
        .route("/source", get(source))
        .fallback(api_not_found);
    let app = Router::new().nest("/api", api);
    let app = match &session.assets {
        Some(dir) => app.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => app.route("/", get(index_page)).route("/index.html", get(index_page)),
    };
    app.with_state(session)
}

/// Serves until the process is stopped. Port 0 picks a free port; the
/// bound address is logged and returned through `bound`.
pub async fn serve(session: Arc<Session>, port: u16, bound: impl FnOnce(SocketAddr)) -> Result<(), CliError> {
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| CliError::Io {
        path: addr.to_string(),
        reason: e.to_string(),
    })?;
    let local = listener.local_addr().map_err(|e| CliError::Io {
        path: addr.to_string(),
        reason: e.to_string(),
    })?;
    bound(local);
    axum::serve(listener, router(session)).await.map_err(|e| CliError::Io {
        path: local.to_string(),
        reason: e.to_string(),
    })
}
