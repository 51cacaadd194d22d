use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use prefscreen_core::screening::Status;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::registry::AppState;

type ApiResult<T> = Result<T, ApiError>;

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/campaigns", post(create).get(list))
        .route("/campaigns/{id}", get(describe))
        .route("/campaigns/{id}/next-pair", get(next_pair))
        .route("/campaigns/{id}/labels", post(label))
        .route("/campaigns/{id}/metrics", get(metrics))
        .route("/campaigns/{id}/screened", get(screened))
        .route("/campaigns/{id}/property-ranges", get(ranges))
        .route("/campaigns/{id}/suspend", post(suspend))
        .route("/campaigns/{id}/resume", post(resume));
    let app = match &state.config().ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    };
    app.with_state(state)
}

#[derive(Serialize)]
struct Created {
    campaign_id: String,
}

async fn create(State(state): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::invalid("", "body is not UTF-8"))?;
    let key = headers
        .get(IDEMPOTENCY_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);
    let campaign_id = state.create(text, key)?;
    Ok((StatusCode::ACCEPTED, Json(Created { campaign_id })).into_response())
}

async fn list(State(state): State<AppState>) -> impl IntoResponse {
    Json(state.list())
}

async fn describe(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(state.get(&id)?.snapshot().descriptor))
}

async fn next_pair(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let snap = state.get(&id)?.snapshot();
    match snap.descriptor.status {
        Status::Done => Err(ApiError::gone()),
        Status::AwaitingLabels => Ok(match snap.next_pair {
            Some(card) => Json(card).into_response(),
            None => StatusCode::NO_CONTENT.into_response(),
        }),
        s => Err(ApiError::conflict(format!("no pairs are served while {}", s.name()))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Left,
    Right,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRequest {
    pub pair_id: String,
    pub choice: Choice,
    #[serde(default)]
    pub annotator: Option<String>,
    /// Client clock in milliseconds since the epoch.
    #[serde(default)]
    pub client_ts: Option<u64>,
}

async fn label(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: LabelRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_label", e.to_string()))?;
    let entry = state.get(&id)?;
    let mut guard = entry.campaign.lock().await;
    let Some(campaign) = guard.as_mut() else {
        return Err(ApiError::conflict("campaign is initializing"));
    };
    let ack = campaign.submit_label(&req.pair_id, req.choice == Choice::Left, req.annotator, req.client_ts)?;
    entry.touch();
    entry.refresh(campaign, state.depiction_template());
    drop(guard);
    if ack.pending_pairs == 0 {
        state.advance(entry);
    }
    Ok(Json(ack).into_response())
}

/// Finished campaigns never change, so their tables may be cached.
fn cacheable(status: Status, body: impl IntoResponse) -> Response {
    let mut r = body.into_response();
    let value = if status == Status::Done {
        "public, max-age=31536000, immutable"
    } else {
        "no-store"
    };
    r.headers_mut()
        .insert(header::CACHE_CONTROL, HeaderValue::from_static(value));
    r
}

async fn metrics(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let snap = state.get(&id)?.snapshot();
    Ok(cacheable(snap.descriptor.status, Json(snap.metrics)))
}

async fn screened(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let snap = state.get(&id)?.snapshot();
    Ok(cacheable(snap.descriptor.status, Json(snap.screened)))
}

async fn ranges(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let snap = state.get(&id)?.snapshot();
    if snap.descriptor.status == Status::Initializing && snap.ranges.is_empty() {
        return Err(ApiError::conflict("campaign is initializing"));
    }
    Ok(Json(snap.ranges).into_response())
}

async fn suspend(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let entry = state.get(&id)?;
    let mut guard = entry.campaign.lock().await;
    let campaign = guard
        .as_mut()
        .ok_or_else(|| ApiError::conflict("campaign is initializing"))?;
    campaign.suspend()?;
    entry.refresh(campaign, state.depiction_template());
    Ok(Json(entry.snapshot().descriptor).into_response())
}

async fn resume(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let entry = state.get(&id)?;
    let mut guard = entry.campaign.lock().await;
    let campaign = guard
        .as_mut()
        .ok_or_else(|| ApiError::conflict("campaign is initializing"))?;
    campaign.resume()?;
    entry.touch();
    entry.refresh(campaign, state.depiction_template());
    drop(guard);
    state.advance(entry.clone());
    Ok(Json(entry.snapshot().descriptor).into_response())
}
