//! HTTP facade over the corpus, sessions and task judge.
//!
//! All bodies are JSON. Failures carry an [`ApiError`] body with status
//! 400 (`bad_request`), 404 (`not_found`), 409 (`conflict`) or 502
//! (`upstream_failure`).

use std::collections::{BTreeSet, HashMap};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{CatalogError, SegmentRecord};
use crate::fuzzy_index::IndexError;
use crate::harness::{HarnessError, ScoringConfig, Submission, TaskSpec, Verdict};
use crate::ingest::{Category, GridDims};
use crate::query::{
    reorder_by_similarity, QueryError, QuerySpec, ReorderCriterion, ScoredResult, TextClause, VisualClause,
};
use crate::session::{Command, SessionError, SessionStore, VideoGroupView, ViewSegment};
use crate::store::{self, Corpus, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    NotFound,
    Conflict,
    UpstreamFailure,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::Conflict => StatusCode::CONFLICT,
            ErrorCode::UpstreamFailure => StatusCode::BAD_GATEWAY,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Error)]
#[error("{code:?}: {message}")]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default)]
    pub detail: Option<String>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            detail: None,
        }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

impl From<CatalogError> for ApiError {
    fn from(e: CatalogError) -> Self {
        let code = match e {
            CatalogError::UnknownVideo(_) | CatalogError::UnknownSegment(_) => ErrorCode::NotFound,
            _ => ErrorCode::BadRequest,
        };
        ApiError::new(code, e.to_string())
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::Clause { clause, source } => {
                let inner = ApiError::from(*source);
                ApiError::new(inner.code, format!("clause {clause}: {}", inner.message)).with_detail(clause)
            }
            QueryError::UnknownSegment(_) => ApiError::new(ErrorCode::NotFound, e.to_string()),
            QueryError::MissingFeature(_) => ApiError::new(ErrorCode::Conflict, e.to_string()),
            QueryError::Index(IndexError::Io(_)) | QueryError::FeatureFile(_) => {
                ApiError::new(ErrorCode::UpstreamFailure, e.to_string())
            }
            _ => ApiError::new(ErrorCode::BadRequest, e.to_string()),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Catalog(c) => c.into(),
            SessionError::UnknownSession(_) => ApiError::new(ErrorCode::NotFound, e.to_string()),
            SessionError::NotInWorkingSet(_) | SessionError::VideoNotInWorkingSet(_) => {
                ApiError::new(ErrorCode::Conflict, e.to_string())
            }
            SessionError::Log { .. } => ApiError::new(ErrorCode::UpstreamFailure, e.to_string()),
            SessionError::UnknownColor(_) | SessionError::NotAPermutation => {
                ApiError::new(ErrorCode::BadRequest, e.to_string())
            }
        }
    }
}

impl From<HarnessError> for ApiError {
    fn from(e: HarnessError) -> Self {
        let code = match e {
            HarnessError::Late { .. } | HarnessError::TaskMismatch { .. } => ErrorCode::Conflict,
            _ => ErrorCode::BadRequest,
        };
        ApiError::new(code, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(ErrorCode::BadRequest, "malformed request body").with_detail(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::new(ErrorCode::BadRequest, "malformed query string").with_detail(e.body_text())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

struct ArmedTask {
    task_id: String,
    started: Instant,
    wrong: u32,
    found: BTreeSet<usize>,
}

pub struct AppState {
    pub corpus: Corpus,
    pub sessions: SessionStore,
    pub tasks: HashMap<String, TaskSpec>,
    pub scoring: ScoringConfig,
    armed: Mutex<HashMap<String, ArmedTask>>,
}

impl AppState {
    pub fn new(corpus: Corpus, sessions: SessionStore, tasks: Vec<TaskSpec>, scoring: ScoringConfig) -> Self {
        Self {
            corpus,
            sessions,
            tasks: tasks.into_iter().map(|t| (t.task_id.clone(), t)).collect(),
            scoring,
            armed: Mutex::new(HashMap::new()),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    pub session_log: Option<PathBuf>,
    pub tasks_file: Option<PathBuf>,
    pub scoring_file: Option<PathBuf>,
    pub config_file: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

/// Loads the index directory and everything the service needs. Fails fast
/// on a corrupt or mismatched index.
pub fn load_state(index_dir: &Path, opts: &ServeOptions) -> Result<AppState, ServeError> {
    let config = match &opts.config_file {
        Some(p) => Some(crate::config::EngineConfig::load(p).map_err(StoreError::from)?),
        None => None,
    };
    let corpus = Corpus::open(index_dir, config)?;
    let sessions = match &opts.session_log {
        Some(p) => SessionStore::open(p, &corpus.catalog)?,
        None => SessionStore::open(&index_dir.join("sessions.log"), &corpus.catalog)?,
    };
    let tasks = match &opts.tasks_file {
        Some(p) => {
            let tasks = crate::harness::read_tasks(p)?;
            for t in &tasks {
                t.validate_in(&corpus.catalog)?;
            }
            tasks
        }
        None => Vec::new(),
    };
    let scoring = match &opts.scoring_file {
        Some(p) => ScoringConfig::load(p)?,
        None => ScoringConfig::default(),
    };
    Ok(AppState::new(corpus, sessions, tasks, scoring))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/session", post(create_session))
        .route("/api/query", post(run_query))
        .route("/api/videos/{id}/segments", get(video_segments))
        .route("/api/segments/{id}/neighbors", get(segment_neighbors))
        .route("/api/session/{id}/expand", post(expand))
        .route("/api/session/{id}/tag", post(tag))
        .route("/api/session/{id}/reorder", post(reorder))
        .route("/api/session/{id}/view", get(view))
        .route("/api/session/{id}/arm", post(arm_task))
        .route("/api/submit", post(submit))
        .route("/thumbs/{name}", get(thumbnail))
        .fallback(|| async { ApiError::new(ErrorCode::NotFound, "no such endpoint") })
        .with_state(state)
}

pub async fn serve(state: AppState, addr: SocketAddr) -> Result<(), ServeError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// A server running on its own thread and runtime; stops when dropped.
pub struct BackgroundServer {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl BackgroundServer {
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn spawn_background(state: AppState, addr: SocketAddr) -> Result<BackgroundServer, ServeError> {
    let std_listener = std::net::TcpListener::bind(addr).map_err(|source| ServeError::Bind { addr, source })?;
    std_listener.set_nonblocking(true)?;
    let local = std_listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let app = router(Arc::new(state));
    let thread = std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .expect("tokio runtime");
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(std_listener).expect("listener");
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
    });
    Ok(BackgroundServer {
        addr: local,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

// ---------------------------------------------------------------------------
// Handlers
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Health {
    status: &'static str,
    videos: usize,
    segments: usize,
    features: usize,
    documents: [usize; 3],
    vocabulary: [usize; 3],
    tasks: usize,
}

async fn health(State(st): State<Arc<AppState>>) -> Json<Health> {
    let c = &st.corpus;
    Json(Health {
        status: "ok",
        videos: c.catalog.videos().len(),
        segments: c.catalog.segments().len(),
        features: c.features.len(),
        documents: Category::ALL.map(|k| c.index.n_docs(k)),
        vocabulary: Category::ALL.map(|k| c.index.vocabulary(k).len()),
        tasks: st.tasks.len(),
    })
}

#[derive(Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
}

async fn create_session(State(st): State<Arc<AppState>>) -> Json<SessionCreated> {
    Json(SessionCreated {
        session_id: st.sessions.create(),
    })
}

/// One query clause as sent over HTTP.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ApiClause {
    Text {
        category: Category,
        text: String,
        #[serde(default)]
        max_edits: Option<u8>,
    },
    Sketch {
        sketch: SketchBody,
    },
    Example {
        example: String,
    },
}

#[derive(Debug, Clone, Deserialize)]
pub struct SketchBody {
    pub dims: GridDims,
    pub grid: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct QueryBody {
    pub clauses: Vec<ApiClause>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    pub k: usize,
    #[serde(default)]
    pub session_id: Option<String>,
}

impl QueryBody {
    /// Converts to a [`QuerySpec`]. Weights are given in clause order and
    /// re-ordered to the engine's text-then-visual layout.
    pub fn to_spec(&self) -> Result<QuerySpec, ApiError> {
        let mut text_clauses = Vec::new();
        let mut text_weights = Vec::new();
        let mut visual = None;
        let mut visual_weight = None;
        if let Some(w) = &self.weights {
            if w.len() != self.clauses.len() {
                return Err(QueryError::WeightCount {
                    clauses: self.clauses.len(),
                    weights: w.len(),
                }
                .into());
            }
        }
        for (i, c) in self.clauses.iter().enumerate() {
            let w = self.weights.as_ref().map(|w| w[i]);
            let v = match c {
                ApiClause::Text {
                    category,
                    text,
                    max_edits,
                } => {
                    text_clauses.push(TextClause {
                        category: *category,
                        text: text.clone(),
                        max_edits: *max_edits,
                    });
                    text_weights.extend(w);
                    continue;
                }
                ApiClause::Sketch { sketch } => VisualClause::Sketch {
                    dims: sketch.dims,
                    grid: sketch.grid.clone(),
                },
                ApiClause::Example { example } => VisualClause::Example {
                    segment_id: example.clone(),
                },
            };
            if visual.is_some() {
                return Err(QueryError::TwoVisualProbes.into());
            }
            visual = Some(v);
            visual_weight = w;
        }
        let weights = self.weights.as_ref().map(|_| {
            let mut w = text_weights;
            w.extend(visual_weight);
            w
        });
        Ok(QuerySpec {
            text_clauses,
            visual,
            weights,
            k: self.k,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankedSegment {
    pub rank: usize,
    pub segment_id: String,
    pub video_id: String,
    pub start_ms: u64,
    pub end_ms: u64,
    pub score: f64,
    pub breakdown: Vec<f64>,
    pub thumbnail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryResponse {
    pub clauses: Vec<String>,
    pub results: Vec<RankedSegment>,
}

fn ranked(corpus: &Corpus, results: &[ScoredResult]) -> Vec<RankedSegment> {
    results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            let s = corpus.catalog.segment(&r.segment_id)?;
            Some(RankedSegment {
                rank: i + 1,
                segment_id: r.segment_id.clone(),
                video_id: s.video_id.clone(),
                start_ms: s.start_ms,
                end_ms: s.end_ms,
                score: r.score,
                breakdown: r.breakdown.clone(),
                thumbnail: format!("/thumbs/{}", store::thumbnail_name(&r.segment_id)),
            })
        })
        .collect()
}

async fn run_query(
    State(st): State<Arc<AppState>>,
    body: Result<Json<QueryBody>, JsonRejection>,
) -> ApiResult<QueryResponse> {
    let Json(body) = body?;
    let spec = body.to_spec()?;
    if let Some(sid) = &body.session_id {
        st.sessions.get(sid)?;
    }
    let results = st.corpus.context().execute(&spec)?;
    if let Some(sid) = &body.session_id {
        st.sessions.apply(sid, &st.corpus.catalog, Command::seed(&results))?;
    }
    Ok(Json(QueryResponse {
        clauses: spec.clause_labels(),
        results: ranked(&st.corpus, &results),
    }))
}

#[derive(Serialize)]
struct SegmentList {
    video_id: String,
    segments: Vec<SegmentRecord>,
}

async fn video_segments(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<SegmentList> {
    let segments = st.corpus.catalog.segments_of_video(&id)?.to_vec();
    Ok(Json(SegmentList { video_id: id, segments }))
}

#[derive(Deserialize)]
struct RadiusQuery {
    radius: Option<u32>,
}

#[derive(Serialize)]
struct NeighborList {
    segment_id: String,
    radius: u32,
    neighbors: Vec<SegmentRecord>,
}

async fn segment_neighbors(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    q: Result<Query<RadiusQuery>, QueryRejection>,
) -> ApiResult<NeighborList> {
    let Query(q) = q?;
    let radius = q.radius.unwrap_or(1);
    let neighbors = st.corpus.catalog.neighbors(&id, radius)?.into_iter().cloned().collect();
    Ok(Json(NeighborList {
        segment_id: id,
        radius,
        neighbors,
    }))
}

#[derive(Deserialize)]
struct ExpandBody {
    segment_id: Option<String>,
    video_id: Option<String>,
    radius: Option<u32>,
}

#[derive(Serialize)]
struct ExpandResult {
    added: usize,
    size: usize,
}

async fn expand(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<ExpandBody>, JsonRejection>,
) -> ApiResult<ExpandResult> {
    let Json(body) = body?;
    let command = match (body.segment_id, body.video_id) {
        (Some(segment_id), None) => Command::ExpandNeighbors {
            segment_id,
            radius: body.radius.unwrap_or(1),
        },
        (None, Some(video_id)) => Command::ExpandVideo { video_id },
        _ => {
            return Err(ApiError::new(
                ErrorCode::BadRequest,
                "give exactly one of segment_id or video_id",
            ))
        }
    };
    let added = st.sessions.apply(&id, &st.corpus.catalog, command)?;
    let size = st.sessions.read(&id, |ws| ws.len())?;
    Ok(Json(ExpandResult { added, size }))
}

#[derive(Deserialize)]
struct TagBody {
    segment_id: String,
    color: Option<String>,
}

#[derive(Serialize)]
struct TagResult {
    segment_id: String,
    color: Option<String>,
}

async fn tag(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<TagBody>, JsonRejection>,
) -> ApiResult<TagResult> {
    let Json(body) = body?;
    let color = body.color.as_deref().map(str::parse).transpose()?;
    st.sessions.apply(
        &id,
        &st.corpus.catalog,
        Command::Tag {
            segment_id: body.segment_id.clone(),
            color,
        },
    )?;
    Ok(Json(TagResult {
        segment_id: body.segment_id,
        color: color.map(|c| c.to_string()),
    }))
}

#[derive(Deserialize)]
struct ReorderBody {
    anchor: String,
    criterion: ReorderCriterion,
}

#[derive(Deserialize)]
struct ViewQuery {
    mode: Option<String>,
}

#[derive(Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
enum ViewResponse {
    Grid { entries: Vec<ViewSegment> },
    Grouped(VideoGroupView),
}

async fn reorder(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<ReorderBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(body) = body?;
    let results = st.sessions.read(&id, |ws| ws.as_results())?;
    let c = &st.corpus;
    let order = reorder_by_similarity(&results, &body.anchor, body.criterion, &c.catalog, &c.features)?;
    let segment_ids = order.into_iter().map(|r| r.segment_id).collect();
    st.sessions.apply(&id, &c.catalog, Command::Order { segment_ids })?;
    let entries = st.sessions.read(&id, |ws| ws.grid_view())?;
    Ok(Json(ViewResponse::Grid { entries }).into_response())
}

async fn view(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    q: Result<Query<ViewQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(q) = q?;
    let v = match q.mode.as_deref().unwrap_or("grid") {
        "grid" => ViewResponse::Grid {
            entries: st.sessions.read(&id, |ws| ws.grid_view())?,
        },
        "grouped" => ViewResponse::Grouped(st.sessions.read(&id, |ws| ws.group_by_video(&st.corpus.catalog))?),
        other => {
            return Err(ApiError::new(
                ErrorCode::BadRequest,
                format!("unknown view mode {other:?}; expected grid or grouped"),
            ))
        }
    };
    Ok(Json(v).into_response())
}

#[derive(Deserialize)]
struct ArmBody {
    task_id: String,
}

#[derive(Serialize)]
struct Armed {
    task_id: String,
    kind: crate::harness::TaskKind,
    duration_ms: u64,
    hint: Option<String>,
}

async fn arm_task(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<ArmBody>, JsonRejection>,
) -> ApiResult<Armed> {
    let Json(body) = body?;
    st.sessions.get(&id)?;
    let task = st
        .tasks
        .get(&body.task_id)
        .ok_or_else(|| ApiError::new(ErrorCode::NotFound, format!("unknown task {:?}", body.task_id)))?;
    st.armed.lock().expect("armed lock").insert(
        id,
        ArmedTask {
            task_id: task.task_id.clone(),
            started: Instant::now(),
            wrong: 0,
            found: BTreeSet::new(),
        },
    );
    Ok(Json(Armed {
        task_id: task.task_id.clone(),
        kind: task.kind,
        duration_ms: task.duration_ms,
        hint: task.hint.clone(),
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitBody {
    pub session_id: String,
    pub video_id: String,
    pub position_ms: u64,
    /// Scripted clients may state the elapsed time; otherwise it is measured
    /// from when the task was armed.
    #[serde(default)]
    pub elapsed_ms: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub mode: String,
    pub task_id: Option<String>,
    pub verdict: Option<Verdict>,
}

async fn submit(
    State(st): State<Arc<AppState>>,
    body: Result<Json<SubmitBody>, JsonRejection>,
) -> ApiResult<SubmitResponse> {
    let Json(body) = body?;
    st.sessions.get(&body.session_id)?;
    if st.corpus.catalog.video(&body.video_id).is_none() {
        return Err(CatalogError::UnknownVideo(body.video_id).into());
    }

    // judge under the armed-task lock so a session's submissions are serialised
    let judged = {
        let mut armed = st.armed.lock().expect("armed lock");
        match armed.get_mut(&body.session_id) {
            None => None,
            Some(a) => {
                let task = &st.tasks[&a.task_id];
                let elapsed_ms = body
                    .elapsed_ms
                    .unwrap_or_else(|| a.started.elapsed().as_millis() as u64);
                let sub = Submission {
                    task_id: a.task_id.clone(),
                    video_id: body.video_id.clone(),
                    position_ms: body.position_ms,
                    elapsed_ms,
                };
                let result = st.scoring.judge(task, &sub, a.wrong, &a.found);
                let task_id = a.task_id.clone();
                let done = match &result {
                    Ok(v) => {
                        a.wrong = v.wrong_count_so_far;
                        if let Some(i) = v.matched_target {
                            a.found.insert(i);
                        }
                        v.correct && task.kind.is_kis()
                    }
                    Err(HarnessError::Late { .. }) => true,
                    Err(_) => false,
                };
                if done {
                    armed.remove(&body.session_id);
                }
                Some((task_id, elapsed_ms, result))
            }
        }
    };

    let (task_id, elapsed_ms, verdict) = match judged {
        None => (None, None, None),
        Some((task_id, elapsed_ms, result)) => {
            // late submissions are logged too, so offline evaluation sees them
            st.sessions.record(
                &body.session_id,
                Command::Submit {
                    task_id: Some(task_id.clone()),
                    video_id: body.video_id.clone(),
                    position_ms: body.position_ms,
                    elapsed_ms: Some(elapsed_ms),
                },
            )?;
            (Some(task_id), Some(elapsed_ms), Some(result?))
        }
    };
    if task_id.is_none() {
        st.sessions.record(
            &body.session_id,
            Command::Submit {
                task_id: None,
                video_id: body.video_id.clone(),
                position_ms: body.position_ms,
                elapsed_ms,
            },
        )?;
    }
    Ok(Json(SubmitResponse {
        mode: if task_id.is_some() { "competition" } else { "practice" }.to_string(),
        task_id,
        verdict,
    }))
}

async fn thumbnail(State(st): State<Arc<AppState>>, UrlPath(name): UrlPath<String>) -> Result<Response, ApiError> {
    let valid = name
        .strip_suffix(".png")
        .is_some_and(|h| !h.is_empty() && h.bytes().all(|b| b.is_ascii_hexdigit()));
    if !valid {
        return Err(ApiError::new(ErrorCode::NotFound, "no such thumbnail"));
    }
    let path = st.corpus.dir.join(store::THUMBS_DIR).join(&name);
    match tokio::fs::read(&path).await {
        Ok(bytes) => Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response()),
        Err(_) => Err(ApiError::new(ErrorCode::NotFound, "no such thumbnail")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_codes_map_to_status() {
        assert_eq!(ErrorCode::BadRequest.status(), StatusCode::BAD_REQUEST);
        assert_eq!(ErrorCode::NotFound.status(), StatusCode::NOT_FOUND);
        assert_eq!(ErrorCode::Conflict.status(), StatusCode::CONFLICT);
        assert_eq!(ErrorCode::UpstreamFailure.status(), StatusCode::BAD_GATEWAY);
    }

    #[test]
    fn clause_errors_keep_inner_code() {
        let e = QueryError::Clause {
            clause: "1 (visual)".into(),
            source: Box::new(QueryError::UnknownSegment("x".into())),
        };
        let api = ApiError::from(e);
        assert_eq!(api.code, ErrorCode::NotFound);
        assert_eq!(api.detail.as_deref(), Some("1 (visual)"));
        let api = ApiError::from(QueryError::Index(IndexError::EmptyQuery));
        assert_eq!(api.code, ErrorCode::BadRequest);
    }

    #[test]
    fn query_body_reorders_weights() {
        let body: QueryBody = serde_json::from_str(
            r#"{"clauses":[{"example":"s1"},{"category":"asr","text":"boat"}],"weights":[0.25,0.75],"k":5}"#,
        )
        .unwrap();
        let spec = body.to_spec().unwrap();
        assert_eq!(spec.weights, Some(vec![0.75, 0.25]));
        assert_eq!(spec.clause_labels(), ["asr", "visual"]);

        let two: QueryBody = serde_json::from_str(r#"{"clauses":[{"example":"s1"},{"example":"s2"}],"k":5}"#).unwrap();
        assert!(two.to_spec().is_err());
    }
}
