//! HTTP/JSON routes over a [`ServiceState`].
//!
//! Errors come back as `{"error": "<reason>"}` with 404 for unknown users or
//! items, 409 for a stale slate version or a relearn in progress, and 422 for
//! malformed labels or pairs.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use elixir_core::model::{ItemId, UserId};

use crate::error::ServiceError;
use crate::state::{RelearnOutcome, ServiceState, SessionMetrics, SlateView};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemFeedbackBody {
    pub item: String,
    pub liked: bool,
    #[serde(default)]
    pub version: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairFeedbackBody {
    pub rec: String,
    pub other: String,
    pub label: f64,
    #[serde(default)]
    pub version: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackAck {
    pub version: u64,
    pub pending_pairs: usize,
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        use elixir_core::Error as E;
        let status = match &self.0 {
            ServiceError::Core(E::UnknownUser(_) | E::UnknownItem(_)) => StatusCode::NOT_FOUND,
            ServiceError::Core(E::InvalidLabel(_) | E::InvalidPair(..)) | ServiceError::Invalid(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ServiceError::Stale { .. } | ServiceError::Busy(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            log::error!("{}", self.0);
        }
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(ServiceError::Invalid(format!("worker failed: {e}"))))?
        .map_err(ApiError)
}

async fn slate(State(state): State<Arc<ServiceState>>, Path(user): Path<String>) -> ApiResult<SlateView> {
    let slate = blocking(move || state.slate(&UserId::new(user))).await?;
    Ok(Json((*slate).clone()))
}

async fn item_feedback(
    State(state): State<Arc<ServiceState>>,
    Path(user): Path<String>,
    Json(body): Json<ItemFeedbackBody>,
) -> ApiResult<FeedbackAck> {
    let ack = blocking(move || {
        let user = UserId::new(user);
        let version = state.item_feedback(&user, &ItemId::new(body.item), body.liked, body.version)?;
        let pending_pairs = state.metrics(&user)?.pending_pairs;
        Ok(FeedbackAck { version, pending_pairs })
    })
    .await?;
    Ok(Json(ack))
}

async fn pair_feedback(
    State(state): State<Arc<ServiceState>>,
    Path(user): Path<String>,
    Json(body): Json<PairFeedbackBody>,
) -> ApiResult<FeedbackAck> {
    let (version, pending_pairs) = blocking(move || {
        state.pair_feedback(
            &UserId::new(user),
            &ItemId::new(body.rec),
            &ItemId::new(body.other),
            body.label,
            body.version,
        )
    })
    .await?;
    Ok(Json(FeedbackAck { version, pending_pairs }))
}

async fn relearn(State(state): State<Arc<ServiceState>>, Path(user): Path<String>) -> ApiResult<RelearnOutcome> {
    Ok(Json(blocking(move || state.relearn(&UserId::new(user))).await?))
}

async fn metrics(State(state): State<Arc<ServiceState>>, Path(user): Path<String>) -> ApiResult<SessionMetrics> {
    Ok(Json(blocking(move || state.metrics(&UserId::new(user))).await?))
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/users/{user}/slate", get(slate))
        .route("/users/{user}/feedback/item", post(item_feedback))
        .route("/users/{user}/feedback/pair", post(pair_feedback))
        .route("/users/{user}/relearn", post(relearn))
        .route("/users/{user}/metrics", get(metrics))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(state: Arc<ServiceState>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
