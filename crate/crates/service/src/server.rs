//! HTTP/JSON issuer and verifier.
//!
//! | route                | body                 | 200 / 422 body          |
//! |----------------------|----------------------|-------------------------|
//! | `POST /token`        | `TokenIssueRequest`  | `TokenIssueResponse`    |
//! | `POST /token/verify` | `TokenVerifyRequest` | `TokenVerifyResponse`   |
//! | `POST /vc/verify`    | `VcVerifyRequest`    | `PresentationReport`    |
//! | `POST /cert/verify`  | `CertVerifyRequest`  | `CertVerifyResponse`    |
//! | `GET /healthz`       |                      | `ok`                    |
//!
//! A well-formed request whose verification fails answers 422 with the same
//! body shape as a success. Malformed bodies get 400, workspace damage 500;
//! both carry `{"error": ...}`. There is no authentication on the service.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use tokio::sync::RwLock;

use crate::ops::{self, CertVerifyRequest, OpsError, TokenIssueRequest, TokenVerifyRequest, VcVerifyRequest};
use crate::workspace::Workspace;

/// Shared state. Issuance takes the write half, so workspace writes never interleave.
pub struct AppState {
    workspace: Workspace,
    lock: RwLock<()>,
}

pub fn router(workspace: Workspace) -> Router {
    let state = Arc::new(AppState { workspace, lock: RwLock::new(()) });
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/token", post(issue_token))
        .route("/token/verify", post(verify_token))
        .route("/vc/verify", post(verify_presentation))
        .route("/cert/verify", post(verify_certificate))
        .with_state(state)
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(addr: SocketAddr, workspace: Workspace) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_on(listener, workspace).await
}

pub async fn serve_on(listener: tokio::net::TcpListener, workspace: Workspace) -> std::io::Result<()> {
    axum::serve(listener, router(workspace))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[derive(Debug)]
pub enum ApiError {
    BadBody(String),
    Internal(String),
    Ops(OpsError),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::BadBody(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
            ApiError::Ops(e) => {
                let status = StatusCode::from_u16(e.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
                (status, e.to_string())
            }
        };
        (status, Json(serde_json::json!({ "error": message }))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::BadBody(r.body_text())
    }
}

fn verdict<T: Serialize>(valid: bool, body: T) -> Response {
    let status = if valid { StatusCode::OK } else { StatusCode::UNPROCESSABLE_ENTITY };
    (status, Json(body)).into_response()
}

/// Runs blocking workspace I/O off the async executor.
async fn blocking<T: Send + 'static>(
    state: &Arc<AppState>,
    f: impl FnOnce(&Workspace) -> Result<T, OpsError> + Send + 'static,
) -> Result<T, ApiError> {
    let state = Arc::clone(state);
    tokio::task::spawn_blocking(move || f(&state.workspace))
        .await
        .map_err(|e| ApiError::Internal(format!("worker failed: {e}")))?
        .map_err(ApiError::Ops)
}

async fn issue_token(
    State(state): State<Arc<AppState>>,
    body: Result<Json<TokenIssueRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body?;
    let _guard = state.lock.write().await;
    let now = req.now.unwrap_or_else(crate::system_now);
    let seed: [u8; 32] = rand::random();
    let out = blocking(&state, move |ws| ops::token_issue(ws, &req, seed, now)).await?;
    Ok(Json(out).into_response())
}

async fn verify_token(
    State(state): State<Arc<AppState>>,
    body: Result<Json<TokenVerifyRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body?;
    let _guard = state.lock.read().await;
    let now = req.now.unwrap_or_else(crate::system_now);
    let out = blocking(&state, move |ws| ops::token_verify(ws, &req, now)).await?;
    Ok(verdict(out.valid, out))
}

async fn verify_presentation(
    State(state): State<Arc<AppState>>,
    body: Result<Json<VcVerifyRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body?;
    let _guard = state.lock.read().await;
    let now = req.now.unwrap_or_else(crate::system_now);
    let out = blocking(&state, move |ws| ops::vc_verify(ws, &req, now)).await?;
    Ok(verdict(out.valid, out))
}

async fn verify_certificate(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CertVerifyRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body?;
    let _guard = state.lock.read().await;
    let out = blocking(&state, move |ws| ops::cert_verify(ws, &req)).await?;
    Ok(verdict(out.valid, out))
}
