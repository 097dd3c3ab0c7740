//! HTTP service around a [`RefinementSession`].
//!
//! | method | path                    | body / reply                                            |
//! |--------|-------------------------|---------------------------------------------------------|
//! | GET    | `/session/next`         | candidate view with `"done": false`, or `{"done": true}` |
//! | POST   | `/session/decision`     | `{node_id, action, annotator?, timestamp?}` → `{summary, progress}` |
//! | POST   | `/session/undo`         | `{annotator?, timestamp?}` or empty → `{ok, undone, progress}` |
//! | GET    | `/session/progress`     | `{decided, remaining, total}`                           |
//! | GET    | `/ontology/context/{id}`| node, ancestors, children, linked events                |
//! | GET    | `/session/export`       | ontology document once no candidate is left             |
//!
//! Errors reply `{"error": message}` with 400 (malformed request), 404
//! (unknown node), 409 (not a candidate, nothing to undo, unfinished) or
//! 500 (log write failure). Every accepted decision is appended to the log
//! before it becomes visible.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use evontology_core::refine::{Action, Decision, Next, RefineError, RefinementSession};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::RwLock;

use crate::io::session_log::{self, LogEntry};
use crate::io::{self, DataError};

pub struct SessionState {
    pub session: RefinementSession,
    /// Where decisions are appended; `None` keeps the session in memory.
    pub log_path: Option<PathBuf>,
    pub annotator: String,
}

pub type Shared = Arc<RwLock<SessionState>>;

#[derive(Debug, thiserror::Error)]
pub enum OpenError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{path}: {source}")]
    Replay {
        path: PathBuf,
        #[source]
        source: RefineError,
    },
}

impl SessionState {
    /// Loads the ontology and its links, then replays `log` if it exists.
    pub fn open(ontology: &Path, log: Option<&Path>, annotator: &str) -> Result<Self, OpenError> {
        let ont = io::ontology::read(ontology)?;
        let links = io::ontology::read_links(ontology)?;
        let decisions = match log {
            Some(p) if p.exists() => {
                let entries = session_log::parse(&io::read_text(p)?, p)?;
                session_log::effective_decisions(&entries, p)?
            }
            _ => Vec::new(),
        };
        let session = RefinementSession::replay(ont, links, &decisions).map_err(|source| OpenError::Replay {
            path: log.map(Path::to_path_buf).unwrap_or_default(),
            source,
        })?;
        Ok(SessionState {
            session,
            log_path: log.map(Path::to_path_buf),
            annotator: annotator.into(),
        })
    }

    fn log(&self, entry: &LogEntry) -> Result<(), ApiError> {
        match &self.log_path {
            Some(p) => session_log::append(p, entry).map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
            None => Ok(()),
        }
    }
}

#[derive(Debug)]
struct ApiError(StatusCode, String);

impl ApiError {
    fn bad_request(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::BAD_REQUEST, msg.into())
    }
}

impl From<RefineError> for ApiError {
    fn from(e: RefineError) -> Self {
        let status = match &e {
            RefineError::UnknownNode(_) => StatusCode::NOT_FOUND,
            RefineError::NotACandidate(_) | RefineError::NothingToUndo | RefineError::Unfinished { .. } => StatusCode::CONFLICT,
            RefineError::Replay { .. } | RefineError::Ontology(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn parse_body<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionBody {
    node_id: Option<String>,
    action: Option<String>,
    annotator: Option<String>,
    timestamp: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct UndoBody {
    annotator: Option<String>,
    timestamp: Option<u64>,
}

async fn next(State(state): State<Shared>) -> Json<Value> {
    let s = state.read().await;
    Json(match s.session.next_candidate() {
        Next::Done => json!({ "done": true }),
        Next::Candidate(view) => {
            let mut v = serde_json::to_value(view).expect("candidate view serializes");
            v["done"] = Value::Bool(false);
            v
        }
    })
}

async fn decision(State(state): State<Shared>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let body: DecisionBody = parse_body(&body)?;
    let node_id = body.node_id.ok_or_else(|| ApiError::bad_request("missing node_id"))?;
    let action = body.action.ok_or_else(|| ApiError::bad_request("missing action"))?;
    let action = Action::parse(&action)
        .ok_or_else(|| ApiError::bad_request(format!("unknown action {action:?} (expected select_leaf, reject or skip)")))?;

    let mut s = state.write().await;
    let annotator = body.annotator.unwrap_or_else(|| s.annotator.clone());
    let d = Decision::new(node_id, action, annotator, body.timestamp.unwrap_or_else(now));
    let mut next = s.session.clone();
    let summary = next.decide(d.clone())?;
    s.log(&LogEntry::Decision(d))?;
    s.session = next;
    Ok(Json(json!({ "summary": summary, "progress": s.session.progress() })))
}

async fn undo(State(state): State<Shared>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let body: UndoBody = parse_body(&body)?;
    let mut s = state.write().await;
    let mut next = s.session.clone();
    let undone = next.undo()?;
    s.log(&LogEntry::Undo {
        node_id: undone.node_id.clone(),
        annotator: body.annotator.unwrap_or_else(|| s.annotator.clone()),
        timestamp: body.timestamp.unwrap_or_else(now),
    })?;
    s.session = next;
    Ok(Json(json!({ "ok": true, "undone": undone, "progress": s.session.progress() })))
}

async fn progress(State(state): State<Shared>) -> Json<Value> {
    Json(serde_json::to_value(state.read().await.session.progress()).expect("progress serializes"))
}

async fn context(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<Value>, ApiError> {
    let view = state.read().await.session.context(&id)?;
    Ok(Json(serde_json::to_value(view).expect("context serializes")))
}

async fn export(State(state): State<Shared>) -> Result<Response, ApiError> {
    let (ont, _) = state.read().await.session.finalize()?;
    Ok(([(header::CONTENT_TYPE, "application/json")], io::ontology::to_json(&ont)).into_response())
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/session/next", get(next))
        .route("/session/decision", post(decision))
        .route("/session/undo", post(undo))
        .route("/session/progress", get(progress))
        .route("/ontology/context/{id}", get(context))
        .route("/session/export", get(export))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(state: SessionState, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(Arc::new(RwLock::new(state)))).await
}
