//! JSON-over-HTTP advisor API.
//!
//! | route          | body                                 |
//! |----------------|--------------------------------------|
//! | `GET /health`  |                                      |
//! | `GET /models`  |                                      |
//! | `POST /parse`  | a raw play record                    |
//! | `POST /rank`   | `{situation, playbook?, rank_by?}`   |
//!
//! Errors come back as `{"error": {"code": ..., "message": ...}}`.

use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{enumerate_candidates, rank_plays, CandidatePlay, ModelSet, RankBy, RankedPlay, Situation};
use crate::dataset::Target;
use crate::error::Error;
use crate::eval::Evaluation;
use crate::labels::label_play;
use crate::playparse::{process_record, FilterOptions, RawPlayRecord};

/// Shared service state. Bundles are immutable; a reload swaps the whole set.
#[derive(Clone)]
pub struct AppState {
    models: Arc<RwLock<Arc<ModelSet>>>,
    dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(models: ModelSet) -> Self {
        Self { models: Arc::new(RwLock::new(Arc::new(models))), dir: None }
    }

    pub fn from_dir(dir: PathBuf) -> crate::Result<Self> {
        let models = ModelSet::load_dir(&dir)?;
        Ok(Self { dir: Some(dir), ..Self::new(models) })
    }

    pub fn snapshot(&self) -> Arc<ModelSet> {
        self.models.read().expect("model lock poisoned").clone()
    }

    pub fn swap(&self, models: ModelSet) {
        *self.models.write().expect("model lock poisoned") = Arc::new(models);
    }

    /// Re-reads the model directory. On failure the current set stays live.
    pub fn reload(&self) -> crate::Result<usize> {
        let Some(dir) = &self.dir else {
            return Ok(self.snapshot().bundles.len());
        };
        let models = ModelSet::load_dir(dir)?;
        let n = models.bundles.len();
        self.swap(models);
        Ok(n)
    }
}

struct ApiError(StatusCode, String, String);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::NoModels => StatusCode::SERVICE_UNAVAILABLE,
            Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError(status, e.code().to_string(), e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError(StatusCode::BAD_REQUEST, "malformed_request".into(), r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({"error": {"code": self.1, "message": self.2}}))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelInfo {
    pub name: String,
    pub kind: String,
    pub target: Target,
    pub format_version: u32,
    pub width: usize,
    pub corpus_fingerprint: Option<String>,
    pub metrics: Option<Evaluation>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RankRequest {
    pub situation: Situation,
    #[serde(default)]
    pub playbook: Option<Vec<CandidatePlay>>,
    #[serde(default)]
    pub rank_by: Option<RankBy>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RankResponse {
    pub rank_by: RankBy,
    /// Always "model_estimate": scores are predictions, not observed results.
    pub score_kind: String,
    pub plays: Vec<RankedPlay>,
}

async fn health(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({"status": "ok", "models": state.snapshot().bundles.len()}))
}

async fn models(State(state): State<AppState>) -> Json<Vec<ModelInfo>> {
    let set = state.snapshot();
    Json(
        set.bundles
            .iter()
            .map(|b| ModelInfo {
                name: b.name.clone(),
                kind: b.pipeline.model.kind_name().to_string(),
                target: b.meta.target,
                format_version: b.format_version,
                width: b.schema.width(),
                corpus_fingerprint: b.meta.corpus_fingerprint.clone(),
                metrics: b.meta.metrics,
            })
            .collect(),
    )
}

async fn parse(body: Result<Json<RawPlayRecord>, JsonRejection>) -> ApiResult<serde_json::Value> {
    let Json(record) = body?;
    record.validate()?;
    Ok(Json(match process_record(&record, &FilterOptions::default()) {
        Ok(p) => json!({
            "status": "relevant",
            "labels": label_play(&p.features, &p.outcome),
            "features": p.features,
            "outcome": p.outcome,
        }),
        Err(reason) => json!({"status": "rejected", "reason": reason}),
    }))
}

async fn rank(
    State(state): State<AppState>,
    body: Result<Json<RankRequest>, JsonRejection>,
) -> ApiResult<RankResponse> {
    let Json(req) = body?;
    let candidates = enumerate_candidates(req.playbook.as_deref())?;
    let set = state.snapshot();
    let (rank_by, plays) = rank_plays(&req.situation, &candidates, &set, req.rank_by)?;
    Ok(Json(RankResponse { rank_by, score_kind: "model_estimate".into(), plays }))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/models", get(models))
        .route("/parse", post(parse))
        .route("/rank", post(rank))
        .with_state(state)
}

/// Serves until ctrl-c. On unix, SIGHUP reloads the model directory.
pub async fn serve(state: AppState, addr: std::net::SocketAddr) -> crate::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    #[cfg(unix)]
    {
        let state = state.clone();
        tokio::spawn(async move {
            use tokio::signal::unix::{signal, SignalKind};
            let Ok(mut hup) = signal(SignalKind::hangup()) else { return };
            while hup.recv().await.is_some() {
                match state.reload() {
                    Ok(n) => log::info!("reloaded {n} model(s)"),
                    Err(e) => log::error!("reload failed, keeping current models: {e}"),
                }
            }
        });
    }
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
