//! HTTP service hosting interactive clustering sessions.
//!
//! A human answers the pending must-link/cannot-link question of each
//! session over JSON:
//!
//! | method | path | body / response |
//! |---|---|---|
//! | POST | `/sessions` | `{n_super?, seed?}` → `{id}` |
//! | GET | `/sessions/{id}` | session view |
//! | GET | `/sessions/{id}/pending` | `{state, seq, a, b, progress}` |
//! | POST | `/sessions/{id}/answer` | `{seq, answer}` |
//! | POST | `/sessions/{id}/cancel` | session view |
//! | GET | `/sessions/{id}/result` | result document |
//! | GET | `/dataset/projection` | `{points: [{id, xy, super_instance}]}` |
//!
//! Anything else is served from the static directory, if configured.

mod projection;
mod session;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cobra_core::oracle::SubmitError;
use cobra_core::query_log::LogEntry;
use cobra_core::{Answer, Dataset, RunParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;
use uuid::Uuid;

pub use projection::project_2d;
pub use session::{Session, SessionState, Snapshot};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub max_sessions: usize,
    pub default_n_super: usize,
    pub default_seed: u64,
    /// How long `pending` and `create` wait for the run to publish a query.
    pub pending_wait: Duration,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_sessions: 16,
            default_n_super: 25,
            default_seed: 0,
            pending_wait: Duration::from_secs(2),
            static_dir: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("too many active sessions (limit {0})")]
    TooManySessions(usize),
    #[error("n_super must be in [2, {max}], got {got}")]
    InvalidNSuper { got: usize, max: usize },
    #[error(transparent)]
    Submit(#[from] SubmitError),
    #[error("session is {0:?}")]
    WrongState(SessionState),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, code) = match &self {
            Self::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown-session"),
            Self::TooManySessions(_) => (StatusCode::TOO_MANY_REQUESTS, "session-limit"),
            Self::InvalidNSuper { .. } => (StatusCode::BAD_REQUEST, "invalid-config"),
            Self::Submit(SubmitError::Stale { .. }) => (StatusCode::CONFLICT, "stale"),
            Self::Submit(SubmitError::Terminal) => (StatusCode::CONFLICT, "terminal"),
            Self::WrongState(_) => (StatusCode::CONFLICT, "wrong-state"),
            Self::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
        };
        let body = ErrorBody {
            error: code,
            message: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

struct Inner {
    config: ServiceConfig,
    /// Normalized data the runs cluster.
    data: Arc<Dataset>,
    /// Same instances with their original feature values, for display.
    display: Dataset,
    xy: Vec<[f64; 2]>,
    sessions: Mutex<HashMap<Uuid, Arc<Session>>>,
}

/// Shared service state. Cheap to clone.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// `display` is the deduplicated dataset with original values; runs use
    /// its normalized copy.
    pub fn new(display: Dataset, config: ServiceConfig) -> Self {
        let data = display.normalize();
        let xy = project_2d(&data);
        Self(Arc::new(Inner {
            config,
            data: Arc::new(data),
            display,
            xy,
            sessions: Mutex::new(HashMap::new()),
        }))
    }

    pub fn data(&self) -> &Dataset {
        &self.0.data
    }

    /// Registers a new session and starts its run.
    pub fn create_session(&self, params: RunParams) -> Result<(String, Arc<Session>), ServiceError> {
        let max = self.0.data.len();
        if params.n_super < 2 || params.n_super > max {
            return Err(ServiceError::InvalidNSuper { got: params.n_super, max });
        }
        let limit = self.0.config.max_sessions;
        let id = Uuid::new_v4();
        let mut sessions = self.0.sessions.lock().unwrap_or_else(|e| e.into_inner());
        let active = sessions.values().filter(|s| !s.snapshot().state.is_terminal()).count();
        if active >= limit {
            return Err(ServiceError::TooManySessions(limit));
        }
        let session = Arc::new(Session::start(Arc::clone(&self.0.data), params));
        sessions.insert(id, Arc::clone(&session));
        tracing::info!(%id, ?params, "session created");
        Ok((id.to_string(), session))
    }

    fn session(&self, id: &str) -> Result<Arc<Session>, ServiceError> {
        let unknown = || ServiceError::UnknownSession(id.to_owned());
        let key = Uuid::parse_str(id).map_err(|_| unknown())?;
        let sessions = self.0.sessions.lock().unwrap_or_else(|e| e.into_inner());
        sessions.get(&key).cloned().ok_or_else(unknown)
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/pending", get(get_pending))
        .route("/sessions/{id}/answer", post(submit_answer))
        .route("/sessions/{id}/cancel", post(cancel_session))
        .route("/sessions/{id}/result", get(get_result))
        .route("/dataset/projection", get(get_projection));
    let api = match &state.0.config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    api.with_state(state)
}

/// Serves on `listener` until the process is stopped.
pub async fn serve(state: AppState, listener: TcpListener) -> Result<(), ServiceError> {
    serve_until(state, listener, std::future::pending()).await
}

/// Serves on `listener` until `shutdown` resolves, then finishes the
/// requests already in flight.
pub async fn serve_until(
    state: AppState,
    listener: TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    tracing::info!(addr = %listener.local_addr()?, "session service listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
pub struct CreateRequest {
    pub n_super: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Progress {
    pub oracle_count: usize,
    pub n_clusters: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct InstanceView {
    pub id: usize,
    pub features: Vec<f64>,
    pub xy: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PendingPair {
    pub seq: u64,
    pub a: InstanceView,
    pub b: InstanceView,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PendingView {
    pub state: SessionState,
    #[serde(flatten)]
    pub query: Option<PendingPair>,
    pub progress: Progress,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub state: SessionState,
    pub config: RunParams,
    pub pending: Option<PendingPair>,
    pub progress: Progress,
    pub error: Option<String>,
    /// Queries and answers so far; present once the run has ended.
    pub query_log: Option<Vec<LogEntry>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnswerRequest {
    pub seq: u64,
    pub answer: Answer,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Accepted {
    pub seq: u64,
}

#[derive(Debug, Default, Deserialize)]
pub struct ProjectionQuery {
    pub session: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub id: usize,
    pub xy: [f64; 2],
    pub super_instance: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Projection {
    pub feature_names: Vec<String>,
    pub points: Vec<ProjectedPoint>,
}

impl AppState {
    fn instance(&self, id: usize) -> InstanceView {
        InstanceView {
            id,
            features: self.0.display.row(id).to_vec(),
            xy: self.0.xy[id],
        }
    }

    fn pair(&self, snap: &Snapshot) -> Option<PendingPair> {
        snap.pending.map(|p| PendingPair {
            seq: p.seq,
            a: self.instance(p.a),
            b: self.instance(p.b),
        })
    }

    fn view(&self, id: &str, session: &Session) -> SessionView {
        let snap = session.snapshot();
        SessionView {
            id: id.to_owned(),
            state: snap.state,
            config: session.params,
            pending: self.pair(&snap),
            progress: Progress {
                oracle_count: snap.oracle_count,
                n_clusters: snap.n_clusters,
            },
            error: snap.error.clone(),
            query_log: snap.log,
        }
    }
}

/// Waits off the async runtime until the run publishes a query or ends.
async fn settle(session: Arc<Session>, wait: Duration) {
    let _ = tokio::task::spawn_blocking(move || {
        let deadline = std::time::Instant::now() + wait;
        loop {
            let snap = session.snapshot();
            if snap.state == SessionState::AwaitingAnswer || snap.state.is_terminal() {
                return;
            }
            let left = deadline.saturating_duration_since(std::time::Instant::now());
            if left.is_zero() {
                return;
            }
            // wake on the next published query; terminal states are polled
            session.handle().wait_pending(left.min(Duration::from_millis(20)));
        }
    })
    .await;
}

async fn create_session(
    State(state): State<AppState>,
    body: Option<Json<CreateRequest>>,
) -> Result<(StatusCode, Json<Created>), ServiceError> {
    let req = body.map(|Json(r)| r).unwrap_or_default();
    let cfg = &state.0.config;
    let params = RunParams {
        n_super: req.n_super.unwrap_or(cfg.default_n_super),
        seed: req.seed.unwrap_or(cfg.default_seed),
    };
    let (id, session) = state.create_session(params)?;
    settle(session, cfg.pending_wait).await;
    Ok((StatusCode::CREATED, Json(Created { id })))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ServiceError> {
    let session = state.session(&id)?;
    Ok(Json(state.view(&id, &session)))
}

async fn get_pending(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<PendingView>, ServiceError> {
    let session = state.session(&id)?;
    settle(Arc::clone(&session), state.0.config.pending_wait).await;
    let snap = session.snapshot();
    Ok(Json(PendingView {
        state: snap.state,
        query: state.pair(&snap),
        progress: Progress {
            oracle_count: snap.oracle_count,
            n_clusters: snap.n_clusters,
        },
    }))
}

async fn submit_answer(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<AnswerRequest>,
) -> Result<Json<Accepted>, ServiceError> {
    let session = state.session(&id)?;
    session.handle().submit(req.seq, req.answer)?;
    Ok(Json(Accepted { seq: req.seq }))
}

async fn cancel_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ServiceError> {
    let session = state.session(&id)?;
    let current = session.snapshot().state;
    if current.is_terminal() {
        return Err(ServiceError::WrongState(current));
    }
    let worker = Arc::clone(&session);
    let _ = tokio::task::spawn_blocking(move || worker.cancel_and_join()).await;
    tracing::info!(%id, "session cancelled");
    Ok(Json(state.view(&id, &session)))
}

async fn get_result(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let session = state.session(&id)?;
    match session.result() {
        Some(doc) => Ok(Json(doc).into_response()),
        None => Err(ServiceError::WrongState(session.snapshot().state)),
    }
}

async fn get_projection(
    State(state): State<AppState>,
    Query(q): Query<ProjectionQuery>,
) -> Result<Json<Projection>, ServiceError> {
    let membership = match q.session.as_deref() {
        Some(id) => state.session(id)?.super_instance_of(),
        None => None,
    };
    let points = state
        .0
        .xy
        .iter()
        .enumerate()
        .map(|(id, &xy)| ProjectedPoint {
            id,
            xy,
            super_instance: membership.as_ref().map(|m| m[id]),
        })
        .collect();
    Ok(Json(Projection {
        feature_names: state.0.display.feature_names().to_vec(),
        points,
    }))
}
