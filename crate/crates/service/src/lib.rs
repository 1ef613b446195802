//! HTTP facade over the conversation pipeline: sessions, messages, task
//! lists, dataset upload and plan export, with sessions snapshotted to disk
//! after every change.

use std::collections::BTreeMap;
use std::io::Cursor;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use aps_core::contracts::{bundled_catalog, load_catalog, ColumnSpec, ContractError};
use aps_core::conversation::{Assistant, AssistantResponse, Clock, Outcome, SessionState, TaskRecord};
use aps_core::data::{parse_instance_with_id, DataError, Diagnostic, DATASET_FILES};
use aps_core::llm::{LlmConfig, LlmGateway};
use aps_core::retriever::{
    index_catalog, Embedder, HashingEmbedder, RemoteEmbedder, RetrievalError, DEFAULT_EMBED_TIMEOUT,
};
use aps_core::tools::ToolManager;
use axum::extract::{DefaultBodyLimit, Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::Mutex;

pub const DEFAULT_PORT: u16 = 8080;
const MAX_UPLOAD_BYTES: usize = 32 * 1024 * 1024;
const SESSION_PREFIX: &str = "session-";

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Snapshot root; sessions live in memory only when unset.
    pub data_dir: Option<PathBuf>,
    /// Contract directory; the bundled catalog when unset.
    pub catalog_dir: Option<PathBuf>,
    pub llm: LlmConfig,
}

impl ServiceConfig {
    /// Reads `DATA_DIR`, `LLM_ENDPOINT`, `LLM_TIMEOUT_S` and `EMBED_ENDPOINT`.
    pub fn from_env() -> Self {
        ServiceConfig {
            data_dir: std::env::var_os("DATA_DIR").filter(|v| !v.is_empty()).map(PathBuf::from),
            catalog_dir: None,
            llm: LlmConfig::from_env(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Catalog(#[from] ContractError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("snapshot store {path}: {source}")]
    Store { path: PathBuf, source: std::io::Error },
    #[error("snapshot {path} is unreadable: {detail}")]
    CorruptSnapshot { path: PathBuf, detail: String },
}

/// Embedder named by the config: the remote endpoint when one is set,
/// otherwise the deterministic hashing embedder.
pub fn build_embedder(config: &LlmConfig) -> Result<Arc<dyn Embedder>, RetrievalError> {
    match &config.embed_endpoint {
        Some(url) => Ok(Arc::new(RemoteEmbedder::probe(url.clone(), DEFAULT_EMBED_TIMEOUT)?)),
        None => Ok(Arc::new(HashingEmbedder::default())),
    }
}

pub fn build_assistant(config: &ServiceConfig) -> Result<Assistant, ServiceError> {
    let catalog = match &config.catalog_dir {
        Some(dir) => load_catalog(dir)?,
        None => bundled_catalog(),
    };
    let tools = ToolManager::new(&catalog)?;
    let embedder = build_embedder(&config.llm)?;
    let index = index_catalog(&catalog.contracts, embedder.as_ref())?;
    Ok(Assistant::new(tools, index, embedder, LlmGateway::from_config(&config.llm)))
}

/// One JSON file per session, replaced atomically.
#[derive(Debug, Clone)]
pub struct SnapshotStore {
    dir: PathBuf,
}

impl SnapshotStore {
    pub fn open(root: &Path) -> Result<Self, ServiceError> {
        let dir = root.join("sessions");
        std::fs::create_dir_all(&dir).map_err(|source| ServiceError::Store {
            path: dir.clone(),
            source,
        })?;
        Ok(SnapshotStore { dir })
    }

    fn path_of(&self, session_id: &str) -> PathBuf {
        self.dir.join(format!("{session_id}.json"))
    }

    pub fn save(&self, session: &SessionState) -> Result<(), ServiceError> {
        let io = |source| ServiceError::Store {
            path: self.dir.clone(),
            source,
        };
        let bytes = serde_json::to_vec(session).expect("session state serializes");
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        std::io::Write::write_all(&mut tmp, &bytes).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(self.path_of(&session.session_id)).map_err(|e| io(e.error))?;
        Ok(())
    }

    /// All stored sessions, ordered by id.
    pub fn load_all(&self) -> Result<Vec<SessionState>, ServiceError> {
        let entries = std::fs::read_dir(&self.dir).map_err(|source| ServiceError::Store {
            path: self.dir.clone(),
            source,
        })?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        paths
            .into_iter()
            .map(|path| {
                let text = std::fs::read_to_string(&path).map_err(|source| ServiceError::Store {
                    path: path.clone(),
                    source,
                })?;
                serde_json::from_str(&text).map_err(|e| ServiceError::CorruptSnapshot {
                    path: path.clone(),
                    detail: e.to_string(),
                })
            })
            .collect()
    }
}

pub struct AppState {
    assistant: Arc<Assistant>,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<SessionState>>>>,
    store: Option<SnapshotStore>,
    next_session: AtomicU64,
}

fn session_number(id: &str) -> u64 {
    id.strip_prefix(SESSION_PREFIX).and_then(|n| n.parse().ok()).unwrap_or(0)
}

impl AppState {
    /// Restores every snapshot found under `data_dir`.
    pub fn new(assistant: Assistant, data_dir: Option<&Path>) -> Result<Self, ServiceError> {
        let store = data_dir.map(SnapshotStore::open).transpose()?;
        let restored = match &store {
            Some(s) => s.load_all()?,
            None => Vec::new(),
        };
        let next = restored.iter().map(|s| session_number(&s.session_id)).max().unwrap_or(0) + 1;
        let sessions = restored
            .into_iter()
            .map(|s| (s.session_id.clone(), Arc::new(Mutex::new(s))))
            .collect();
        Ok(AppState {
            assistant: Arc::new(assistant),
            sessions: RwLock::new(sessions),
            store,
            next_session: AtomicU64::new(next),
        })
    }

    pub fn with_clock(assistant: Assistant, clock: Arc<dyn Clock>, data_dir: Option<&Path>) -> Result<Self, ServiceError> {
        Self::new(assistant.with_clock(clock), data_dir)
    }

    /// Shared handle to a session; holding its lock blocks message posts.
    pub fn session_handle(&self, id: &str) -> Option<Arc<Mutex<SessionState>>> {
        self.sessions.read().expect("session map lock").get(id).cloned()
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<SessionState>>, ApiError> {
        self.session_handle(id)
            .ok_or_else(|| ApiError::not_found(format!("unknown session {id}")))
    }

    fn persist(&self, session: &SessionState) -> Result<(), ApiError> {
        match &self.store {
            Some(store) => store.save(session).map_err(|e| {
                tracing::error!(error = %e, "snapshot failed");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("could not persist session: {e}"))
            }),
            None => Ok(()),
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: json!({ "error": message.into() }),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiTable {
    pub name: String,
    pub columns: Vec<ColumnSpec>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiMessage {
    pub role: String,
    pub text: String,
    pub renderables: Vec<ApiTable>,
    pub steps: Vec<String>,
    pub tasks: Vec<TaskRecord>,
    pub outcome: Outcome,
    pub timestamp: DateTime<Utc>,
}

impl From<AssistantResponse> for ApiMessage {
    fn from(r: AssistantResponse) -> Self {
        ApiMessage {
            role: "assistant".into(),
            text: r.text,
            renderables: r
                .renderables
                .into_iter()
                .map(|t| ApiTable {
                    name: t.name,
                    columns: t.columns,
                    rows: t.rows,
                })
                .collect(),
            steps: r.steps,
            tasks: r.tasks,
            outcome: r.outcome,
            timestamp: r.timestamp,
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct PostMessage {
    pub text: String,
}

#[derive(Debug, Deserialize)]
pub struct PlanQuery {
    pub format: Option<String>,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/tasks", get(get_tasks))
        .route(
            "/sessions/{id}/data",
            post(ingest_data).layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES)),
        )
        .route("/sessions/{id}/plans/{pid}", get(get_plan))
        .with_state(state)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let assistant = tokio::task::spawn_blocking(move || {
        build_assistant(&config).and_then(|a| AppState::new(a, config.data_dir.as_deref()))
    })
    .await??;
    let app = router(Arc::new(assistant));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, app).await?;
    Ok(())
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "llm": if state.assistant.gateway.is_stub() { "stub" } else { "remote" },
        "tools": state.assistant.tools.catalog.len(),
    }))
}

async fn create_session(State(state): State<Arc<AppState>>) -> Result<(StatusCode, Json<Value>), ApiError> {
    let n = state.next_session.fetch_add(1, Ordering::SeqCst);
    let id = format!("{SESSION_PREFIX}{n}");
    let session = state.assistant.new_session(id.clone());
    state.persist(&session)?;
    state
        .sessions
        .write()
        .expect("session map lock")
        .insert(id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))))
}

async fn get_session(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionState>, ApiError> {
    let session = state.session(&id)?;
    let guard = session.lock().await;
    Ok(Json(guard.clone()))
}

async fn post_message(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<PostMessage>,
) -> Result<Json<ApiMessage>, ApiError> {
    if body.text.trim().is_empty() {
        return Err(ApiError::bad_request("message text is empty"));
    }
    let session = state.session(&id)?;
    let mut guard = session.try_lock_owned().map_err(|_| {
        ApiError::new(
            StatusCode::CONFLICT,
            format!("session {id} is still processing a message; retry when it finishes"),
        )
    })?;
    let worker = state.clone();
    tokio::task::spawn_blocking(move || {
        let response = worker.assistant.handle_message(&mut guard, &body.text);
        worker.persist(&guard)?;
        Ok(Json(ApiMessage::from(response)))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn get_tasks(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Vec<TaskRecord>>, ApiError> {
    let session = state.session(&id)?;
    let guard = session.lock().await;
    Ok(Json(guard.task_log.records.clone()))
}

/// Directory under `root` holding the dataset files: `root` itself or the
/// shallowest subdirectory containing them.
fn find_dataset_dir(root: &Path) -> PathBuf {
    let mut frontier = vec![root.to_path_buf()];
    for _ in 0..4 {
        let mut next = Vec::new();
        for dir in &frontier {
            if DATASET_FILES.iter().all(|f| dir.join(f).is_file()) {
                return dir.clone();
            }
            if let Ok(entries) = std::fs::read_dir(dir) {
                let mut subdirs: Vec<PathBuf> = entries
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.is_dir())
                    .collect();
                subdirs.sort();
                next.extend(subdirs);
            }
        }
        frontier = next;
    }
    root.to_path_buf()
}

fn data_error(e: DataError) -> ApiError {
    let diagnostics: Vec<Diagnostic> = match &e {
        DataError::Invalid(d) => d.clone(),
        _ => Vec::new(),
    };
    ApiError {
        status: StatusCode::BAD_REQUEST,
        body: json!({ "error": e.to_string(), "diagnostics": diagnostics }),
    }
}

async fn ingest_data(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: axum::body::Bytes,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let session = state.session(&id)?;
    let mut guard = session.try_lock_owned().map_err(|_| {
        ApiError::new(StatusCode::CONFLICT, format!("session {id} is busy; retry when it finishes"))
    })?;
    let worker = state.clone();
    tokio::task::spawn_blocking(move || {
        let dir = tempfile::tempdir()
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        let mut archive = zip::ZipArchive::new(Cursor::new(body))
            .map_err(|e| ApiError::bad_request(format!("upload is not a zip archive: {e}")))?;
        archive
            .extract(dir.path())
            .map_err(|e| ApiError::bad_request(format!("could not unpack archive: {e}")))?;
        let dataset = find_dataset_dir(dir.path());
        let instance_id = if dataset == dir.path() {
            "dataset".to_string()
        } else {
            dataset.file_name().and_then(|n| n.to_str()).unwrap_or("dataset").to_string()
        };
        let instance = parse_instance_with_id(&dataset, &instance_id).map_err(data_error)?;
        let (instance_id, model_id, plan_id) = worker
            .assistant
            .ingest(&mut guard, instance)
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        worker.persist(&guard)?;
        Ok((
            StatusCode::CREATED,
            Json(json!({ "instance_id": instance_id, "model_id": model_id, "plan_id": plan_id })),
        ))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn get_plan(
    State(state): State<Arc<AppState>>,
    UrlPath((id, pid)): UrlPath<(String, String)>,
    Query(q): Query<PlanQuery>,
) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let guard = session.lock().await;
    let plan = guard
        .workspace
        .plan(&pid)
        .ok_or_else(|| ApiError::not_found(format!("unknown plan {pid}")))?;
    match q.format.as_deref().unwrap_or("json") {
        "json" => Ok(Json(plan).into_response()),
        "csv" => Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], plan.to_csv()).into_response()),
        other => Err(ApiError::bad_request(format!("unsupported format {other:?}; use json or csv"))),
    }
}
