//! JSON-over-HTTP front end for a trained [`QueryClassifier`].
//!
//! Endpoints: `GET /healthz`, `POST /predict`, `POST /reload`. The served
//! model is an immutable snapshot behind an atomic pointer; a reload swaps
//! the pointer, so each request sees exactly one model.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use arc_swap::ArcSwap;
use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use querycat_core::models::{ModelError, Prediction, QueryClassifier};
use querycat_core::textprep::{read_vocab, TextprepError, Vocabulary};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: String, source: std::io::Error },
    #[error("invalid service configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Vocab(#[from] TextprepError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    pub model_path: PathBuf,
    pub vocab_path: PathBuf,
    pub top_k: usize,
    pub max_query_bytes: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8080".into(),
            model_path: PathBuf::from("model.qcat"),
            vocab_path: PathBuf::from("vocab.tsv"),
            top_k: 3,
            max_query_bytes: 1024,
        }
    }
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<(), ServeError> {
        if self.top_k == 0 || self.max_query_bytes == 0 {
            return Err(ServeError::InvalidConfig("top_k and max_query_bytes must be >= 1".into()));
        }
        Ok(())
    }
}

/// A loaded model and the version string derived from its checkpoint bytes.
#[derive(Debug)]
pub struct Snapshot {
    pub classifier: QueryClassifier,
    pub version: String,
}

pub struct AppState {
    snapshot: ArcSwap<Snapshot>,
    vocab: Vocabulary,
    top_k: usize,
    max_query_bytes: usize,
}

impl AppState {
    pub fn new(classifier: QueryClassifier, version: String, vocab: Vocabulary, config: &ServiceConfig) -> Result<Self, ServeError> {
        config.validate()?;
        classifier.check_vocab(&vocab)?;
        Ok(AppState {
            snapshot: ArcSwap::from_pointee(Snapshot { classifier, version }),
            vocab,
            top_k: config.top_k,
            max_query_bytes: config.max_query_bytes,
        })
    }

    /// Loads vocabulary and model from the configured paths.
    pub fn load(config: &ServiceConfig) -> Result<Self, ServeError> {
        let vocab = read_vocab(&config.vocab_path)?;
        let (classifier, version) = QueryClassifier::load(&config.model_path, Some(&vocab))?;
        Self::new(classifier, version, vocab, config)
    }

    pub fn current(&self) -> Arc<Snapshot> {
        self.snapshot.load_full()
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Loads and installs a new checkpoint. On failure the old model stays.
    pub fn reload(&self, path: &Path) -> Result<String, ServeError> {
        let (classifier, version) = QueryClassifier::load(path, Some(&self.vocab))?;
        self.snapshot.store(Arc::new(Snapshot { classifier, version: version.clone() }));
        Ok(version)
    }
}

#[derive(Debug, Deserialize)]
struct PredictRequest {
    query: String,
    top_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub model_version: String,
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Deserialize)]
struct ReloadRequest {
    model_path: PathBuf,
}

struct ApiError {
    status: StatusCode,
    code: &'static str,
    detail: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str) -> Self {
        ApiError { status, code, detail: None }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = serde_json::json!({ "error": self.code });
        if let Some(d) = self.detail {
            body["detail"] = d.into();
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, code: "bad_request", detail: Some(r.body_text()) }
    }
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "model_version": state.current().version }))
}

async fn predict(
    State(state): State<Arc<AppState>>,
    body: Result<Json<PredictRequest>, JsonRejection>,
) -> Result<Json<PredictResponse>, ApiError> {
    let Json(req) = body?;
    if req.query.len() > state.max_query_bytes {
        return Err(ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "query_too_large"));
    }
    let top_k = req.top_k.unwrap_or(state.top_k);
    if top_k == 0 {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_top_k"));
    }
    let snap = state.current();
    match snap.classifier.predict(&req.query, &state.vocab) {
        Ok(mut predictions) => {
            predictions.truncate(top_k);
            Ok(Json(PredictResponse { model_version: snap.version.clone(), predictions }))
        }
        Err(ModelError::EmptyQuery) => Err(ApiError::new(StatusCode::BAD_REQUEST, "empty_query")),
        Err(e) => Err(ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            code: "prediction_failed",
            detail: Some(e.to_string()),
        }),
    }
}

async fn reload(
    State(state): State<Arc<AppState>>,
    body: Result<Json<ReloadRequest>, JsonRejection>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let Json(req) = body?;
    let worker = Arc::clone(&state);
    let outcome = tokio::task::spawn_blocking(move || worker.reload(&req.model_path))
        .await
        .map_err(|e| ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, code: "reload_failed", detail: Some(e.to_string()) })?;
    match outcome {
        Ok(version) => Ok(Json(serde_json::json!({ "model_version": version }))),
        Err(e) => Err(ApiError { status: StatusCode::CONFLICT, code: "reload_failed", detail: Some(e.to_string()) }),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/predict", post(predict))
        .route("/reload", post(reload))
        .with_state(state)
}

/// A running server. Dropping the handle stops it gracefully.
pub struct ServiceHandle {
    pub addr: SocketAddr,
    pub state: Arc<AppState>,
    shutdown: oneshot::Sender<()>,
    task: JoinHandle<std::io::Result<()>>,
}

impl ServiceHandle {
    pub async fn shutdown(self) -> std::io::Result<()> {
        let _ = self.shutdown.send(());
        self.task.await.map_err(std::io::Error::other)?
    }

    /// Runs until the server stops on its own.
    pub async fn wait(self) -> std::io::Result<()> {
        let ServiceHandle { task, shutdown, .. } = self;
        let result = task.await.map_err(std::io::Error::other)?;
        drop(shutdown);
        result
    }
}

/// Loads the model and vocabulary, binds, and starts serving in a task.
pub async fn start(config: ServiceConfig) -> Result<ServiceHandle, ServeError> {
    let state = Arc::new(AppState::load(&config)?);
    serve_state(state, &config.bind).await
}

pub async fn serve_state(state: Arc<AppState>, bind: &str) -> Result<ServiceHandle, ServeError> {
    let bind_err = |source| ServeError::BindFailure { addr: bind.to_string(), source };
    let listener = TcpListener::bind(bind).await.map_err(bind_err)?;
    let addr = listener.local_addr().map_err(bind_err)?;
    let (tx, rx) = oneshot::channel();
    let app = router(Arc::clone(&state));
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    Ok(ServiceHandle { addr, state, shutdown: tx, task })
}
