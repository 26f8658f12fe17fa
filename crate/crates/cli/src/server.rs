//! JSON session API over the pipeline.
//!
//! Every mutating request must carry `If-Match` with the session version
//! from the last `ETag`; a missing header is answered with 428, a stale one
//! with 409. Pipeline work runs on the blocking pool.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use curator_core::pipeline::{self, ItemUpdate, Patch, PipelineError, Providers, RunConfig, RunMode, RunSettings, Session};
use curator_core::retrieval::RetrievalParams;
use curator_core::shoplist::{ItemPath, ShoppingItem};
use serde::Deserialize;
use serde_json::{json, Value};
use tracing::{info, warn};

pub struct AppState {
    providers: Providers,
    settings: RunSettings,
    runs_dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    next_session: AtomicU64,
}

impl AppState {
    pub fn new(providers: Providers, settings: RunSettings, runs_dir: Option<PathBuf>) -> Arc<Self> {
        Arc::new(Self {
            providers,
            settings,
            runs_dir,
            sessions: RwLock::new(HashMap::new()),
            next_session: AtomicU64::new(1),
        })
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no session {id:?}")))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/list", get(get_list))
        .route("/sessions/{id}/manifest", get(get_manifest))
        .route("/sessions/{id}/history", get(get_history))
        .route("/sessions/{id}/metrics", post(recompute_metrics))
        .route("/sessions/{id}/items", post(add_item))
        .route("/sessions/{id}/items/{path}", patch(update_item).delete(delete_item))
        .route("/sessions/{id}/items/{path}/retrieve", post(retrieve_item))
        .route("/sessions/{id}/items/{path}/select", post(select_item))
        .route("/sessions/{id}/items/{path}/texture", post(retexture_item))
        .route("/assets/{id}/thumbnail", get(thumbnail))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> anyhow::Result<()> {
    axum::serve(listener, router(state)).await?;
    Ok(())
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = if e.is_unavailable() {
            StatusCode::BAD_GATEWAY
        } else {
            match e.root() {
                PipelineError::InvalidConfig(_) => StatusCode::BAD_REQUEST,
                PipelineError::UnknownItemPath(_) | PipelineError::UnknownAsset(_) => StatusCode::NOT_FOUND,
                PipelineError::UnknownCandidate { .. } | PipelineError::InvalidEdit(_) => StatusCode::UNPROCESSABLE_ENTITY,
                PipelineError::VersionConflict { .. } => StatusCode::CONFLICT,
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            }
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            warn!(status = %self.status, error = %self.message, "request failed");
        }
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn etag(version: u64) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{version}\"")).expect("digits are a valid header")
}

fn with_version(status: StatusCode, version: u64, body: Value) -> Response {
    (status, [(header::ETAG, etag(version))], Json(body)).into_response()
}

fn expected_version(headers: &HeaderMap) -> Result<u64, ApiError> {
    let raw = headers
        .get(header::IF_MATCH)
        .ok_or_else(|| ApiError::new(StatusCode::PRECONDITION_REQUIRED, "If-Match header with the session version is required"))?;
    let text = raw.to_str().map_err(|_| ApiError::bad_request("If-Match is not ASCII"))?.trim();
    let text = text.strip_prefix("W/").unwrap_or(text).trim_matches('"');
    text.parse()
        .map_err(|_| ApiError::bad_request(format!("If-Match {text:?} is not a session version")))
}

fn item_path(raw: &str) -> Result<ItemPath, ApiError> {
    raw.parse().map_err(|e| ApiError::bad_request(format!("{e}")))
}

/// An empty or `null` body yields the default.
fn parse_body<T: serde::de::DeserializeOwned + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    let parsed: Option<T> =
        serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("invalid body: {e}")))?;
    Ok(parsed.unwrap_or_default())
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("worker failed: {e}")))?
}

/// Applies `patches` in order under one version check and returns the new
/// version with the session's resulting state.
async fn edit(state: Arc<AppState>, id: String, headers: HeaderMap, patches: Vec<Patch>) -> Result<(u64, Session), ApiError> {
    let expected = expected_version(&headers)?;
    let session = state.session(&id)?;
    blocking(move || {
        let mut s = session.lock().expect("session poisoned");
        if s.version != expected {
            return Err(PipelineError::VersionConflict {
                expected,
                current: s.version,
            }
            .into());
        }
        let mut staged = s.clone();
        for patch in patches {
            let version = staged.version;
            staged.apply(patch, version, &state.providers)?;
        }
        *s = staged;
        Ok((s.version, s.clone()))
    })
    .await
}

fn item_response(version: u64, session: &Session, path: &ItemPath) -> Response {
    let item = session.manifest.item(path);
    with_version(StatusCode::OK, version, json!({ "version": version, "item": item }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    scene: String,
    #[serde(default)]
    config: Option<RunSettings>,
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let req: CreateSession =
        serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("invalid body: {e}")))?;
    let settings = req.config.unwrap_or_else(|| state.settings.clone());
    let config = RunConfig::new(&req.scene, RunMode::Full, settings)?;
    config.validate()?;
    let worker = state.clone();
    let manifest = blocking(move || Ok(pipeline::run(&config, &worker.providers, worker.runs_dir.as_deref())?)).await?;
    let n = state.next_session.fetch_add(1, Ordering::Relaxed);
    let id = format!("{}-{n}", manifest.run_id);
    let session = Session::new(id.clone(), manifest);
    let (version, run_id) = (session.version, session.manifest.run_id.clone());
    state
        .sessions
        .write()
        .expect("session table poisoned")
        .insert(id.clone(), Arc::new(Mutex::new(session)));
    info!(session = %id, "session created");
    Ok(with_version(
        StatusCode::CREATED,
        version,
        json!({ "session_id": id, "version": version, "run_id": run_id }),
    ))
}

/// Runs `f` on a snapshot of the session and tags the reply with its version.
fn read_session(state: &AppState, id: &str, f: impl FnOnce(&Session) -> Value) -> ApiResult {
    let session = state.session(id)?;
    let s = session.lock().expect("session poisoned");
    Ok(with_version(StatusCode::OK, s.version, f(&s)))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    read_session(&state, &id, |s| {
        json!({
            "session_id": s.id,
            "version": s.version,
            "run_id": s.manifest.run_id,
            "scene": s.manifest.config.scene,
            "edits": s.history.len(),
        })
    })
}

async fn get_list(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    read_session(&state, &id, |s| {
        json!({
            "version": s.version,
            "shopping_list": s.manifest.shopping_list,
            "items": s.manifest.items,
            "metrics": s.manifest.metrics,
        })
    })
}

async fn get_manifest(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    read_session(&state, &id, |s| serde_json::to_value(&s.manifest).expect("manifest serializes"))
}

async fn get_history(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    read_session(&state, &id, |s| json!({ "version": s.version, "history": s.history }))
}

async fn update_item(
    State(state): State<Arc<AppState>>,
    Path((id, raw)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let path = item_path(&raw)?;
    let update: ItemUpdate = parse_body(&body)?;
    let (version, session) = edit(state, id, headers, vec![Patch::UpdateItem { path: path.clone(), update }]).await?;
    Ok(item_response(version, &session, &path))
}

async fn delete_item(State(state): State<Arc<AppState>>, Path((id, raw)): Path<(String, String)>, headers: HeaderMap) -> ApiResult {
    let path = item_path(&raw)?;
    let (version, _) = edit(state, id, headers, vec![Patch::DeleteItem { path }]).await?;
    Ok(with_version(StatusCode::OK, version, json!({ "version": version })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AddItem {
    #[serde(default)]
    parent: Option<ItemPath>,
    item: ShoppingItem,
}

async fn add_item(State(state): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let req: AddItem =
        serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("invalid body: {e}")))?;
    let (version, session) = edit(
        state,
        id,
        headers,
        vec![Patch::AddItem {
            parent: req.parent.clone(),
            item: req.item,
        }],
    )
    .await?;
    let list = session.manifest.shopping_list.as_ref().expect("edited session has a list");
    let path = match &req.parent {
        Some(p) => p.child(list.get(p).map_or(0, |n| n.children.len().saturating_sub(1))),
        None => ItemPath::root(list.anchors.len() - 1),
    };
    let item = session.manifest.item(&path);
    Ok(with_version(
        StatusCode::CREATED,
        version,
        json!({ "version": version, "path": path, "item": item }),
    ))
}

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RetrieveBody {
    k: Option<usize>,
    w: Option<f64>,
}

async fn retrieve_item(
    State(state): State<Arc<AppState>>,
    Path((id, raw)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let path = item_path(&raw)?;
    let req: RetrieveBody = parse_body(&body)?;
    let mut patches = Vec::new();
    if req.k.is_some() || req.w.is_some() {
        let current = {
            let session = state.session(&id)?;
            let s = session.lock().expect("session poisoned");
            let record = s
                .manifest
                .item(&path)
                .ok_or_else(|| ApiError::from(PipelineError::UnknownItemPath(path.clone())))?;
            record.retrieval.unwrap_or(s.manifest.config.settings.retrieval)
        };
        let params = RetrievalParams {
            k: req.k.unwrap_or(current.k),
            w: req.w.unwrap_or(current.w),
        };
        patches.push(Patch::SetRetrievalParams { path: path.clone(), params });
    }
    patches.push(Patch::Retrieve { path: path.clone() });
    let (version, session) = edit(state, id, headers, patches).await?;
    Ok(item_response(version, &session, &path))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectBody {
    rank: usize,
}

async fn select_item(
    State(state): State<Arc<AppState>>,
    Path((id, raw)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let path = item_path(&raw)?;
    let req: SelectBody =
        serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("invalid body: {e}")))?;
    let (version, session) = edit(state, id, headers, vec![Patch::Select { path: path.clone(), rank: req.rank }]).await?;
    Ok(item_response(version, &session, &path))
}

async fn retexture_item(State(state): State<Arc<AppState>>, Path((id, raw)): Path<(String, String)>, headers: HeaderMap) -> ApiResult {
    let path = item_path(&raw)?;
    let (version, session) = edit(state, id, headers, vec![Patch::Retexture { path: path.clone() }]).await?;
    Ok(item_response(version, &session, &path))
}

async fn recompute_metrics(State(state): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult {
    let (version, session) = edit(state, id, headers, vec![Patch::RecomputeMetrics]).await?;
    Ok(with_version(
        StatusCode::OK,
        version,
        json!({ "version": version, "metrics": session.manifest.metrics }),
    ))
}

fn content_type(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        Some("gif") => "image/gif",
        _ => "application/octet-stream",
    }
}

async fn thumbnail(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let index = &state.providers.index;
    let asset = index
        .get(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no asset {id:?}")))?;
    let first = asset
        .thumbnail_refs
        .first()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("asset {id:?} has no thumbnail")))?;
    let path = index.resolve(first);
    let read_path = path.clone();
    let bytes = blocking(move || {
        std::fs::read(&read_path).map_err(|e| ApiError::new(StatusCode::NOT_FOUND, format!("thumbnail for {id:?}: {e}")))
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response())
}
