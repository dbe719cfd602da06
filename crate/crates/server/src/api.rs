//! The `/v1` HTTP API.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};

use crate::engine::Engine;
use crate::error::{ApiError, ApiResult};
use crate::manifest::Manifest;
use crate::store::Store;
use crate::views::trial_payload;

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

type AppState = Arc<Store>;

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/experiments", get(list).post(create))
        .route("/v1/experiments/import", post(import))
        .route("/v1/experiments/{id}", get(describe))
        .route("/v1/experiments/{id}/next-trial", get(next_trial))
        .route("/v1/experiments/{id}/export", get(export))
        .route("/v1/experiments/{id}/snapshot-hash", get(snapshot_hash))
        .route("/v1/experiments/{id}/state", get(full_state))
        .route("/v1/experiments/{id}/autocomplete", get(autocomplete))
        .route("/v1/experiments/{id}/explorer", get(explorer).post(explore))
        .route("/v1/experiments/{id}/images/{stimulus}", get(image))
        .route("/v1/trials/{trial}/response", post(respond))
        .route("/v1/stimuli/{file}", get(stimulus))
        .with_state(store)
}

/// Store calls may fsync or render, so they run off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
}

fn parse_json(body: &Bytes) -> ApiResult<Value> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("invalid JSON: {e}")))
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn list(State(store): State<AppState>) -> ApiResult<Json<Value>> {
    let mut out = Vec::new();
    for id in store.ids() {
        out.push(store.with_state(&id, |s| s.summary())?);
    }
    Ok(Json(json!({ "experiments": out })))
}

async fn create(State(store): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::BadRequest("body is not UTF-8".into()))?;
    let manifest = Manifest::from_json(text)?;
    let id = blocking({
        let store = store.clone();
        move || store.create(manifest)
    })
    .await?;
    let summary = store.with_state(&id, |s| s.summary())?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id, "experiment": summary }))))
}

async fn import(State(store): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let text = String::from_utf8(body.to_vec()).map_err(|_| ApiError::BadRequest("body is not UTF-8".into()))?;
    let id = blocking({
        let store = store.clone();
        move || store.import(&text)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id }))))
}

async fn describe(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    store
        .with_state(&id, |s| {
            let mut v = s.summary();
            v["manifest"] = serde_json::to_value(&s.meta.manifest).expect("manifest");
            v
        })
        .map(Json)
}

async fn next_trial(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<Value>> {
    let participant = q
        .get("participant")
        .cloned()
        .ok_or_else(|| ApiError::BadRequest("missing ?participant=".into()))?;
    blocking(move || {
        let t = store.next_trial(&id, &participant)?;
        trial_payload(&t, &store.cache)
    })
    .await
    .map(Json)
}

async fn respond(
    State(store): State<AppState>,
    Path(trial): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let body = parse_json(&body)?;
    let key = headers
        .get(IDEMPOTENCY_HEADER)
        .map(|v| v.to_str().map(str::to_string))
        .transpose()
        .map_err(|_| ApiError::BadRequest("idempotency key must be ASCII".into()))?;
    blocking(move || store.respond(&trial, &body, key.as_deref())).await.map(Json)
}

async fn export(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let log = store.export(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], log).into_response())
}

async fn snapshot_hash(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let (seq, hash) = store.snapshot_hash(&id)?;
    Ok(Json(json!({ "id": id, "seq": seq, "hash": hash })))
}

async fn full_state(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    store
        .with_state(&id, |s| serde_json::to_value(s).expect("state serializes"))
        .map(Json)
}

async fn autocomplete(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<Value>> {
    let prefix = q.get("prefix").cloned().unwrap_or_default();
    store.with_state(&id, |s| match &s.engine {
        Engine::Step(e) => Ok(Json(json!({ "prefix": prefix, "candidates": e.autocomplete(&prefix) }))),
        _ => Err(ApiError::BadRequest(format!("{id} is not a step experiment"))),
    })?
}

fn with_explorer<T>(store: &Store, id: &str, f: impl FnOnce(&crate::prediction::Explorer) -> ApiResult<T>) -> ApiResult<T> {
    store.with_state(id, |s| match &s.meta.setup {
        Some(setup) => f(&setup.explorer),
        None => Err(ApiError::BadRequest(format!("{id} is not a prediction experiment"))),
    })?
}

async fn explorer(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    with_explorer(&store, &id, |e| {
        Ok(Json(json!({
            "method": e.method,
            "labels": e.labels,
            "robots": e.scores.iter().map(|(id, s)| json!({ "id": id, "scores": s })).collect::<Vec<_>>(),
        })))
    })
}

/// Body `{"scores": [..]}` finds the nearest corpus robot; `{"stimulus_id": ".."}`
/// selects one directly.
async fn explore(State(store): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let body = parse_json(&body)?;
    with_explorer(&store, &id, |e| {
        let ans = if let Some(sid) = body.get("stimulus_id").and_then(Value::as_str) {
            e.select(sid)?
        } else {
            let scores: Vec<f64> = body
                .get("scores")
                .cloned()
                .and_then(|v| serde_json::from_value(v).ok())
                .ok_or_else(|| ApiError::BadRequest("expected `scores` (numbers) or `stimulus_id`".into()))?;
            if scores.iter().any(|x| !x.is_finite()) {
                return Err(ApiError::Unprocessable("scores must be finite".into()));
            }
            e.nearest(&scores)?
        };
        Ok(Json(serde_json::to_value(ans).expect("answer serializes")))
    })
}

async fn image(State(store): State<AppState>, Path((id, stimulus)): Path<(String, String)>) -> ApiResult<Response> {
    let img = store.with_state(&id, |s| s.meta.manifest.stimulus(&stimulus).and_then(|r| r.image.clone()))?;
    let img = img.ok_or_else(|| ApiError::NotFound(format!("no image for {stimulus:?}")))?;
    let path = match &store.options().assets {
        Some(a) => a.join(&img),
        None => std::path::PathBuf::from(&img),
    };
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|_| ApiError::NotFound(format!("image {img:?} unavailable")))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let mime = match ext.as_str() {
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "gif" => "image/gif",
        "webp" => "image/webp",
        "svg" => "image/svg+xml",
        _ => "application/octet-stream",
    };
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}

async fn stimulus(State(store): State<AppState>, Path(file): Path<String>) -> ApiResult<Response> {
    let key = file
        .strip_suffix(".wav")
        .ok_or_else(|| ApiError::NotFound(format!("{file:?} is not a stimulus")))?
        .to_string();
    let bytes = blocking({
        let key = key.clone();
        move || store.cache.get(&key)
    })
    .await?
    .ok_or_else(|| ApiError::NotFound(format!("unknown stimulus {key}")))?;
    Ok((
        [
            (header::CONTENT_TYPE, "audio/wav".to_string()),
            (header::CACHE_CONTROL, "public, max-age=31536000, immutable".to_string()),
            (header::ETAG, format!("\"{key}\"")),
        ],
        bytes.as_ref().clone(),
    )
        .into_response())
}
