//! HTTP API over the graph store, agent registry and run engine.

mod error;
mod store;

use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

pub use error::{ApiError, ErrorCode};
pub use store::{slug, ChatExchange, GraphStore, StoreError, StoredGraph, Transcripts};

use crate::agents::{
    AgentBackend, AgentEntry, AgentError, AgentInvoker, AgentMode, AgentRegistry, ChatMessage,
    ChatRole, EndpointConfig, RegistryError,
};
use crate::context::ApprovalFlag;
use crate::engine::{
    export_report, ApprovalError, ArtifactResolver, DefaultResolver, Engine, Run, RunOptions,
    StartError,
};
use crate::graph::{graph_from_value, validate_graph};
use crate::prebuilt;

pub const DEFAULT_PAGE: usize = 500;
pub const MAX_PAGE: usize = 5000;
const MAX_WAIT_MS: u64 = 30_000;

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Graphs, agents, transcripts and run logs live under this directory.
    /// Without it everything is kept in memory.
    pub data_dir: Option<PathBuf>,
    /// Required as `Authorization: Bearer <token>` on API routes when set.
    pub token: Option<String>,
    /// Built canvas assets, served under `/ui`.
    pub static_dir: Option<PathBuf>,
    pub endpoints: Vec<EndpointConfig>,
    /// Backend used by `/chat`.
    pub chat_mode: AgentMode,
}

/// Bindings may name bundled fixtures or files under the artifact
/// directory; absolute paths and `..` are refused.
struct ConfinedResolver {
    inner: DefaultResolver,
}

impl ArtifactResolver for ConfinedResolver {
    fn load(&self, reference: &str) -> Result<Vec<u8>, String> {
        if !reference.starts_with(prebuilt::REF_PREFIX) {
            let p = Path::new(reference);
            if p.components().any(|c| !matches!(c, Component::Normal(_)))
                || self.inner.base.is_none()
            {
                return Err(
                    "only bundled fixtures and relative artifact paths are accepted".into(),
                );
            }
        }
        self.inner.load(reference)
    }
}

pub struct AppState {
    engine: Engine,
    mock: Arc<AgentInvoker>,
    live: Arc<AgentInvoker>,
    graphs: RwLock<GraphStore>,
    agents: RwLock<AgentRegistry>,
    transcripts: Mutex<Transcripts>,
    token: Option<String>,
    chat_mode: AgentMode,
}

fn read<T>(l: &RwLock<T>) -> std::sync::RwLockReadGuard<'_, T> {
    l.read().unwrap_or_else(|e| e.into_inner())
}

fn write<T>(l: &RwLock<T>) -> std::sync::RwLockWriteGuard<'_, T> {
    l.write().unwrap_or_else(|e| e.into_inner())
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::new(
        StatusCode::INTERNAL_SERVER_ERROR,
        ErrorCode::EndpointError,
        e.to_string(),
    )
}

impl AppState {
    /// Opens or creates the stores. The agent registry is seeded with the
    /// bundled agents that are not already present.
    pub fn new(config: &ServiceConfig) -> std::io::Result<Self> {
        let mocks = prebuilt::mock_agents();
        let mock = Arc::new(AgentInvoker::new(AgentMode::Mock, mocks.clone()));
        let live = Arc::new(config.endpoints.iter().cloned().fold(
            AgentInvoker::new(AgentMode::Live, mocks),
            AgentInvoker::with_endpoint,
        ));
        let resolver = ConfinedResolver {
            inner: DefaultResolver {
                base: config.data_dir.as_ref().map(|d| d.join("artifacts")),
            },
        };
        let mut engine = Engine::new(mock.clone(), Arc::new(resolver));
        let (graphs, mut agents, transcripts) = match &config.data_dir {
            Some(dir) => {
                engine = engine.with_runs_dir(dir.join("runs"));
                (
                    GraphStore::open(dir.join("graphs"))?,
                    AgentRegistry::open(dir.join("agents")).map_err(std::io::Error::other)?,
                    Transcripts::open(dir.join("transcripts"))?,
                )
            }
            None => (
                GraphStore::in_memory(),
                AgentRegistry::in_memory(),
                Transcripts::in_memory(),
            ),
        };
        engine.restore_runs()?;
        for e in prebuilt::manifest().entries {
            let Some(g) = prebuilt::graph(&e.id) else {
                continue;
            };
            for spec in prebuilt::agent_specs(&g) {
                if agents.get(&spec.id).is_none() {
                    let template = g
                        .nodes
                        .iter()
                        .find_map(|n| match &n.config {
                            crate::graph::NodeConfig::Agent(a) if a.agent.id == spec.id => {
                                Some(a.prompt_template.clone())
                            }
                            crate::graph::NodeConfig::Logic(l) => l
                                .agent
                                .as_ref()
                                .filter(|a| a.agent.id == spec.id)
                                .map(|a| a.prompt_template.clone()),
                            _ => None,
                        })
                        .unwrap_or_default();
                    agents
                        .create(AgentEntry {
                            spec,
                            prompt_template: template,
                        })
                        .map_err(std::io::Error::other)?;
                }
            }
        }
        Ok(AppState {
            engine,
            mock,
            live,
            graphs: RwLock::new(graphs),
            agents: RwLock::new(agents),
            transcripts: Mutex::new(transcripts),
            token: config.token.clone(),
            chat_mode: config.chat_mode,
        })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    fn run(&self, id: &str) -> Result<Arc<Run>, ApiError> {
        self.engine
            .run(id)
            .ok_or_else(|| ApiError::not_found(ErrorCode::UnknownRun, &format!("run {id:?}")))
    }

    fn backend(&self, mode: AgentMode) -> Arc<dyn AgentBackend> {
        match mode {
            AgentMode::Mock => self.mock.clone(),
            AgentMode::Live => self.live.clone(),
        }
    }
}

pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/graphs", post(create_graph).get(list_graphs))
        .route("/graphs/{id}", get(get_graph))
        .route("/runs", post(start_run).get(list_runs))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/events", get(get_events))
        .route("/runs/{id}/approval", post(post_approval))
        .route("/runs/{id}/cancel", post(cancel_run))
        .route("/runs/{id}/report", get(get_report))
        .route("/chat", post(chat))
        .route("/chat/{agent_id}", get(get_transcript))
        .route("/agents", get(list_agents).post(create_agent))
        .route(
            "/agents/{id}",
            get(get_agent).put(update_agent).delete(delete_agent),
        )
        .route("/prebuilt", get(list_prebuilt))
        .route("/prebuilt/{id}/instantiate", post(instantiate_prebuilt))
        .route("/", get(index))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state);
    match static_dir {
        Some(dir) => api.nest_service("/ui", tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Builds the state and router for `config`.
pub fn app(config: &ServiceConfig) -> std::io::Result<(Arc<AppState>, Router)> {
    let state = Arc::new(AppState::new(config)?);
    let router = router(state.clone(), config.static_dir.as_deref());
    Ok((state, router))
}

/// Serves until ctrl-c.
pub async fn serve(config: ServiceConfig, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_on(config, listener).await
}

pub async fn serve_on(
    config: ServiceConfig,
    listener: tokio::net::TcpListener,
) -> std::io::Result<()> {
    let (_, router) = app(&config)?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn require_token(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if let Some(expected) = &state.token {
        let given = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(expected.as_str()) {
            let body = json!({"status": 401, "code": "unauthorized", "message": "missing or wrong bearer token"});
            return (StatusCode::UNAUTHORIZED, Json(body)).into_response();
        }
    }
    next.run(req).await
}

/// Parses a JSON body, answering bad content types and malformed bodies
/// with `code`.
fn body<T: DeserializeOwned>(
    headers: &HeaderMap,
    bytes: &Bytes,
    code: ErrorCode,
) -> Result<T, ApiError> {
    let ct = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("");
    let essence = ct.split(';').next().unwrap_or("").trim();
    if !essence.eq_ignore_ascii_case("application/json") {
        return Err(ApiError::new(
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            code,
            format!("content type must be application/json, got {ct:?}"),
        ));
    }
    serde_json::from_slice(bytes)
        .map_err(|e| ApiError::bad_request(code, format!("malformed body: {e}")))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> T + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(internal)
}

fn spawn_execute(state: &Arc<AppState>, run: Arc<Run>) {
    let state = state.clone();
    tokio::task::spawn_blocking(move || state.engine.execute(&run));
}

async fn index() -> Json<Value> {
    Json(json!({
        "service": "telehub",
        "version": env!("CARGO_PKG_VERSION"),
        "ui": "/ui/",
    }))
}

async fn create_graph(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    bytes: Bytes,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let doc: Value = body(&headers, &bytes, ErrorCode::InvalidGraph)?;
    let graph = graph_from_value(&doc).map_err(|errors| {
        ApiError::bad_request(ErrorCode::InvalidGraph, "graph document does not parse")
            .with_extra(json!({"errors": errors, "diagnostics": []}))
    })?;
    let diagnostics = validate_graph(&graph);
    if !diagnostics.is_empty() {
        return Err(
            ApiError::bad_request(ErrorCode::InvalidGraph, "graph has diagnostics")
                .with_extra(json!({"diagnostics": diagnostics})),
        );
    }
    let bindings: BTreeMap<String, String> = match doc.get("default_bindings") {
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| {
            ApiError::bad_request(ErrorCode::InvalidGraph, format!("default_bindings: {e}"))
        })?,
        None => BTreeMap::new(),
    };
    let id = write(&state.graphs)
        .insert(graph, bindings, None)
        .map_err(|e| match e {
            StoreError::DuplicateName(_) => {
                ApiError::conflict(ErrorCode::DuplicateName, e.to_string())
            }
            StoreError::Io(e) => internal(e),
        })?;
    Ok((
        StatusCode::CREATED,
        Json(json!({"id": id, "diagnostics": []})),
    ))
}

fn graph_summary(g: &StoredGraph) -> Value {
    json!({
        "id": g.id,
        "name": g.graph.name,
        "nodes": g.graph.nodes.len(),
        "edges": g.graph.edges.len(),
        "prebuilt": g.prebuilt,
    })
}

async fn list_graphs(State(state): State<Arc<AppState>>) -> Json<Value> {
    let graphs: Vec<Value> = read(&state.graphs).list().map(graph_summary).collect();
    Json(json!({ "graphs": graphs }))
}

async fn get_graph(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Value>, ApiError> {
    let graphs = read(&state.graphs);
    let g = graphs
        .get(&id)
        .ok_or_else(|| ApiError::not_found(ErrorCode::UnknownGraph, &format!("graph {id:?}")))?;
    Ok(Json(json!({
        "id": g.id,
        "graph": g.graph,
        "default_bindings": g.default_bindings,
        "prebuilt": g.prebuilt,
        "diagnostics": validate_graph(&g.graph),
    })))
}

#[derive(Debug, Deserialize)]
struct StartRequest {
    graph_id: String,
    #[serde(default)]
    bindings: BTreeMap<String, String>,
    #[serde(default)]
    agent_mode: AgentMode,
    #[serde(default)]
    approval_deadline_ms: Option<u64>,
}

async fn start_run(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    bytes: Bytes,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let req: StartRequest = body(&headers, &bytes, ErrorCode::UnboundInput)?;
    let (graph, mut bindings) = {
        let graphs = read(&state.graphs);
        let g = graphs.get(&req.graph_id).ok_or_else(|| {
            ApiError::not_found(
                ErrorCode::UnknownGraph,
                &format!("graph {:?}", req.graph_id),
            )
        })?;
        (g.graph.clone(), g.default_bindings.clone())
    };
    bindings.extend(req.bindings);
    let options = RunOptions {
        run_id: None,
        approval_deadline_ms: req.approval_deadline_ms,
        backend: Some(state.backend(req.agent_mode)),
    };
    let st = state.clone();
    let run = blocking(move || st.engine.start_run(graph, &bindings, options))
        .await?
        .map_err(|e| match &e {
            StartError::InvalidGraph(d) => {
                ApiError::bad_request(ErrorCode::InvalidGraph, e.to_string())
                    .with_extra(json!({"diagnostics": d}))
            }
            StartError::UnboundInput(node) => {
                ApiError::bad_request(ErrorCode::UnboundInput, e.to_string())
                    .with_extra(json!({"node": node}))
            }
            StartError::UnknownBinding(node) => {
                ApiError::bad_request(ErrorCode::UnboundInput, e.to_string())
                    .with_extra(json!({"node": node}))
            }
            StartError::ArtifactMissing { .. } => {
                ApiError::bad_request(ErrorCode::UnboundInput, e.to_string())
            }
            StartError::EventLog(_) => internal(&e),
        })?;
    let id = run.id().to_string();
    spawn_execute(&state, run);
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({"run_id": id, "agent_mode": req.agent_mode})),
    ))
}

fn run_view(run: &Run) -> Value {
    let st = run.snapshot();
    let mut v = serde_json::to_value(&st).expect("run state serializes");
    v["event_count"] = json!(st.event_count());
    v["executing"] = json!(run.is_executing());
    v
}

async fn list_runs(State(state): State<Arc<AppState>>) -> Json<Value> {
    let runs: Vec<Value> = state
        .engine
        .run_ids()
        .iter()
        .filter_map(|id| state.engine.run(id))
        .map(|r| {
            let st = r.snapshot();
            json!({"run_id": st.run_id, "graph": st.graph_ref, "status": st.status})
        })
        .collect();
    Json(json!({ "runs": runs }))
}

async fn get_run(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Value>, ApiError> {
    let run = state.run(&id)?;
    state.engine.check_deadline(&run);
    Ok(Json(run_view(&run)))
}

#[derive(Debug, Deserialize)]
struct EventQuery {
    #[serde(default)]
    since: u64,
    limit: Option<usize>,
    /// Wait up to this long for new events when none are available.
    wait_ms: Option<u64>,
}

async fn get_events(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<EventQuery>,
) -> Result<Json<Value>, ApiError> {
    let run = state.run(&id)?;
    let limit = q.limit.unwrap_or(DEFAULT_PAGE).clamp(1, MAX_PAGE);
    let deadline = tokio::time::Instant::now()
        + Duration::from_millis(q.wait_ms.unwrap_or(0).min(MAX_WAIT_MS));
    let events = loop {
        state.engine.check_deadline(&run);
        let page = run.events_since(q.since, limit);
        if !page.is_empty() || tokio::time::Instant::now() >= deadline || run.status().is_terminal()
        {
            break page;
        }
        tokio::time::sleep(Duration::from_millis(25)).await;
    };
    let next = events.last().map_or(q.since, |e| e.seq);
    Ok(Json(json!({
        "run_id": id,
        "events": events,
        "next": next,
        "status": run.status(),
    })))
}

async fn post_approval(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    bytes: Bytes,
) -> Result<Json<Value>, ApiError> {
    let run = state.run(&id)?;
    let mut raw: Value = body(&headers, &bytes, ErrorCode::InvalidFlag)?;
    if let Value::Object(m) = &mut raw {
        m.entry("comment").or_insert_with(|| json!(""));
        m.entry("decided_at_us")
            .or_insert_with(|| json!(state.engine.clock().now_us()));
    }
    let flag: ApprovalFlag = serde_json::from_value(raw).map_err(|e| {
        ApiError::bad_request(ErrorCode::InvalidFlag, format!("approval flag: {e}"))
    })?;
    let status = state
        .engine
        .resolve_approval(&run, flag)
        .map_err(|e| match e {
            ApprovalError::WrongState(_) => {
                ApiError::conflict(ErrorCode::WrongState, e.to_string())
            }
            ApprovalError::InvalidFlag(_) => {
                ApiError::bad_request(ErrorCode::InvalidFlag, e.to_string())
            }
        })?;
    spawn_execute(&state, run);
    Ok(Json(json!({"run_id": id, "status": status})))
}

async fn cancel_run(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Value>, ApiError> {
    let run = state.run(&id)?;
    let status = state
        .engine
        .cancel(&run, "cancelled by request")
        .map_err(|e| ApiError::conflict(ErrorCode::WrongState, e.to_string()))?;
    Ok(Json(json!({"run_id": id, "status": status})))
}

#[derive(Debug, Deserialize)]
struct ReportQuery {
    format: Option<String>,
}

async fn get_report(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ReportQuery>,
) -> Result<Response, ApiError> {
    let run = state.run(&id)?;
    let report = export_report(&run.snapshot())
        .map_err(|e| ApiError::conflict(ErrorCode::WrongState, e.to_string()))?;
    Ok(match q.format.as_deref() {
        Some("md" | "markdown") => (
            [(header::CONTENT_TYPE, "text/markdown; charset=utf-8")],
            report.markdown,
        )
            .into_response(),
        _ => Json(json!({"json": report.json, "markdown": report.markdown})).into_response(),
    })
}

#[derive(Debug, Deserialize)]
struct ChatRequest {
    agent_id: String,
    messages: Vec<ChatMessage>,
}

async fn chat(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    bytes: Bytes,
) -> Result<Json<Value>, ApiError> {
    let req: ChatRequest = body(&headers, &bytes, ErrorCode::UnknownAgent)?;
    let spec = read(&state.agents)
        .get(&req.agent_id)
        .map(|e| e.spec.clone())
        .ok_or_else(|| {
            ApiError::not_found(
                ErrorCode::UnknownAgent,
                &format!("agent {:?}", req.agent_id),
            )
        })?;
    if req.messages.is_empty()
        || req
            .messages
            .iter()
            .any(|m| m.role != ChatRole::Assistant && m.content.trim().is_empty())
    {
        return Err(ApiError::bad_request(
            ErrorCode::UnknownAgent,
            "messages must be non-empty and user/system content must not be blank",
        ));
    }
    let mut messages = Vec::new();
    if !spec.system_prompt.is_empty()
        && req
            .messages
            .first()
            .is_none_or(|m| m.role != ChatRole::System)
    {
        messages.push(ChatMessage::system(spec.system_prompt.clone()));
    }
    messages.extend(req.messages.iter().cloned());
    let backend = state.backend(state.chat_mode);
    let call_spec = spec.clone();
    let call_messages = messages.clone();
    let reply = blocking(move || backend.complete(&call_spec, &call_messages))
        .await?
        .map_err(|e| {
            let status = match e {
                AgentError::Timeout(_) => StatusCode::GATEWAY_TIMEOUT,
                _ => StatusCode::BAD_GATEWAY,
            };
            let detail = match &e {
                AgentError::EndpointError { status, body } => {
                    json!({"endpoint_status": status, "endpoint_body": body})
                }
                _ => json!({}),
            };
            ApiError::new(status, ErrorCode::EndpointError, e.to_string()).with_extra(detail)
        })?;
    let exchange = ChatExchange {
        at_us: state.engine.clock().now_us(),
        messages: req.messages,
        reply: reply.content.clone(),
        prompt_tokens: reply.prompt_tokens,
        completion_tokens: reply.completion_tokens,
        latency_ms: reply.latency_ms,
    };
    lock(&state.transcripts)
        .append(&spec.id, exchange)
        .map_err(internal)?;
    Ok(Json(json!({
        "agent_id": spec.id,
        "reply": reply.content,
        "usage": {"prompt_tokens": reply.prompt_tokens, "completion_tokens": reply.completion_tokens},
        "latency_ms": reply.latency_ms,
    })))
}

async fn get_transcript(
    State(state): State<Arc<AppState>>,
    UrlPath(agent_id): UrlPath<String>,
) -> Result<Json<Value>, ApiError> {
    if read(&state.agents).get(&agent_id).is_none() {
        return Err(ApiError::not_found(
            ErrorCode::UnknownAgent,
            &format!("agent {agent_id:?}"),
        ));
    }
    let t = lock(&state.transcripts).get(&agent_id).to_vec();
    Ok(Json(json!({"agent_id": agent_id, "exchanges": t})))
}

fn registry_error(e: RegistryError) -> ApiError {
    match e {
        RegistryError::Duplicate(_) => ApiError::conflict(ErrorCode::DuplicateName, e.to_string()),
        RegistryError::NotFound(_) => ApiError::new(
            StatusCode::NOT_FOUND,
            ErrorCode::UnknownAgent,
            e.to_string(),
        ),
        RegistryError::Invalid(_) => ApiError::bad_request(ErrorCode::UnknownAgent, e.to_string()),
        RegistryError::Io(_) | RegistryError::Decode(_) => internal(e),
    }
}

async fn list_agents(State(state): State<Arc<AppState>>) -> Json<Value> {
    let agents: Vec<AgentEntry> = read(&state.agents).list().cloned().collect();
    Json(json!({ "agents": agents }))
}

async fn create_agent(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    bytes: Bytes,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let entry: AgentEntry = body(&headers, &bytes, ErrorCode::UnknownAgent)?;
    let mut agents = write(&state.agents);
    let created = agents.create(entry).map_err(registry_error)?;
    Ok((StatusCode::CREATED, Json(json!(created))))
}

async fn get_agent(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Value>, ApiError> {
    read(&state.agents)
        .get(&id)
        .map(|e| Json(json!(e)))
        .ok_or_else(|| ApiError::not_found(ErrorCode::UnknownAgent, &format!("agent {id:?}")))
}

async fn update_agent(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    bytes: Bytes,
) -> Result<Json<Value>, ApiError> {
    let entry: AgentEntry = body(&headers, &bytes, ErrorCode::UnknownAgent)?;
    let mut agents = write(&state.agents);
    let updated = agents.update(&id, entry).map_err(registry_error)?;
    Ok(Json(json!(updated)))
}

async fn delete_agent(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<StatusCode, ApiError> {
    write(&state.agents).delete(&id).map_err(registry_error)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn list_prebuilt() -> Json<Value> {
    let entries: Vec<Value> = prebuilt::manifest()
        .entries
        .iter()
        .map(|e| {
            let g = prebuilt::graph(&e.id);
            json!({
                "id": e.id,
                "title": e.title,
                "nodes": g.as_ref().map(|g| g.nodes.len()),
                "fixtures": e.fixtures.iter().map(|f| &f.name).collect::<Vec<_>>(),
                "default_bindings": e.default_bindings,
            })
        })
        .collect();
    Json(json!({ "prebuilt": entries }))
}

async fn instantiate_prebuilt(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let entry = prebuilt::entry(&id).ok_or_else(|| {
        ApiError::not_found(ErrorCode::UnknownPrebuilt, &format!("prebuilt {id:?}"))
    })?;
    let mut graph = prebuilt::graph(&id).expect("catalog entries carry a graph");
    let mut graphs = write(&state.graphs);
    graph.name = graphs.free_name(&graph.name);
    let gid = graphs
        .insert(graph, entry.default_bindings.clone(), Some(id.clone()))
        .map_err(internal)?;
    let stored = graphs.get(&gid).expect("just inserted");
    Ok((
        StatusCode::CREATED,
        Json(json!({"graph_id": gid, "graph": graph_summary(stored)})),
    ))
}
