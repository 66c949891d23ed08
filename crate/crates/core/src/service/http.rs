//! JSON-over-HTTP front-end for [`ReviewStore`].
//!
//! Mutating routes accept an optional `If-Match: "<revision>"` header; a stale
//! revision yields 409 with the current one. Every argument response carries
//! an `ETag` with the revision it reflects.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use super::store::{Action, ReviewStore, ServiceError, StoredArgument};
use crate::model::DefeaterKind;
use crate::rules::CoverageError;

pub fn router(store: Arc<ReviewStore>) -> Router {
    Router::new()
        .route("/arguments", post(create).get(list))
        .route("/arguments/{id}", get(show))
        .route("/arguments/{id}/diagnostics", get(diagnostics))
        .route("/arguments/{id}/coverage", get(coverage))
        .route("/arguments/{id}/candidates", post(candidates))
        .route("/arguments/{id}/candidates/{cid}/decision", post(decision))
        .route("/arguments/{id}/log", get(log))
        .with_state(store)
}

/// Serves until ctrl-c.
pub async fn serve(store: Arc<ReviewStore>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "review service listening");
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let e = self.0;
        let status =
            StatusCode::from_u16(e.status_code()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let mut body = json!({ "error": e.code(), "message": e.to_string() });
        match &e {
            ServiceError::Parse(errors) => body["errors"] = json!(errors),
            ServiceError::SemanticCheck(d)
            | ServiceError::Coverage(CoverageError::PreconditionViolated(d)) => {
                body["diagnostics"] = json!(d)
            }
            ServiceError::RevisionConflict { current, .. } => {
                body["current_revision"] = json!(current)
            }
            _ => {}
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn etag(revision: u64) -> [(header::HeaderName, HeaderValue); 1] {
    let value = HeaderValue::from_str(&format!("\"{revision}\"")).expect("digits are valid");
    [(header::ETAG, value)]
}

/// Parses `If-Match`; an unparseable value can never match, so it conflicts.
fn if_match(headers: &HeaderMap) -> Option<u64> {
    headers.get(header::IF_MATCH).map(|v| {
        v.to_str()
            .ok()
            .map(|s| s.trim().trim_start_matches("W/").trim_matches('"'))
            .and_then(|s| s.parse().ok())
            .unwrap_or(u64::MAX)
    })
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(ServiceError::Io(format!("worker failed: {e}"))))?
        .map_err(ApiError)
}

fn argument_body(s: &StoredArgument) -> Value {
    json!({
        "argument_id": s.argument_id,
        "revision": s.revision,
        "argument": s.argument,
        "text": s.text(),
        "candidates": s.candidates,
    })
}

async fn create(State(store): State<Arc<ReviewStore>>, body: String) -> ApiResult {
    let out = blocking(move || store.create(&body)).await?;
    let status = if out.flagged {
        StatusCode::UNPROCESSABLE_ENTITY
    } else {
        StatusCode::CREATED
    };
    Ok((status, etag(out.revision), Json(out)).into_response())
}

async fn list(State(store): State<Arc<ReviewStore>>) -> ApiResult {
    Ok(Json(store.list()).into_response())
}

async fn show(State(store): State<Arc<ReviewStore>>, Path(id): Path<String>) -> ApiResult {
    let s = store.get(&id)?;
    Ok((etag(s.revision), Json(argument_body(&s))).into_response())
}

async fn diagnostics(State(store): State<Arc<ReviewStore>>, Path(id): Path<String>) -> ApiResult {
    let (revision, diagnostics) = store.diagnostics(&id)?;
    Ok((
        etag(revision),
        Json(json!({ "revision": revision, "diagnostics": diagnostics })),
    )
        .into_response())
}

async fn coverage(State(store): State<Arc<ReviewStore>>, Path(id): Path<String>) -> ApiResult {
    let (revision, report) = store.coverage(&id)?;
    Ok((etag(revision), Json(report)).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidateRequest {
    target: String,
    kind: DefeaterKind,
}

async fn candidates(
    State(store): State<Arc<ReviewStore>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(req): Json<CandidateRequest>,
) -> ApiResult {
    let expected = if_match(&headers);
    let (stored, candidates) =
        blocking(move || store.request_candidates(&id, &req.target, req.kind, expected)).await?;
    let body = json!({ "revision": stored.revision, "candidates": candidates });
    Ok((StatusCode::CREATED, etag(stored.revision), Json(body)).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionRequest {
    action: Action,
    #[serde(default)]
    edited_text: Option<String>,
}

async fn decision(
    State(store): State<Arc<ReviewStore>>,
    Path((id, cid)): Path<(String, String)>,
    headers: HeaderMap,
    Json(req): Json<DecisionRequest>,
) -> ApiResult {
    let expected = if_match(&headers);
    let stored =
        blocking(move || store.decide(&id, &cid, req.action, req.edited_text.as_deref(), expected))
            .await?;
    Ok((etag(stored.revision), Json(argument_body(&stored))).into_response())
}

async fn log(State(store): State<Arc<ReviewStore>>, Path(id): Path<String>) -> ApiResult {
    let s = store.get(&id)?;
    let body = json!({ "argument_id": s.argument_id, "revision": s.revision, "base": s.base, "log": s.log });
    Ok((etag(s.revision), Json(body)).into_response())
}
