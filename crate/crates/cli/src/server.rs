//! HTTP scoring service over a shared, immutable bundle.
//!
//! `POST /score` with `{"text": "..."}` answers `{"score": .., "cleaned": ..}`;
//! `GET /healthz` answers `{"status": "ok", "model_version": ..}`.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use toxscore_core::ModelBundle;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRequest {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ScoreResponse {
    pub score: f64,
    pub cleaned: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Health {
    pub status: String,
    pub model_version: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ErrorBody {
    pub error: String,
}

fn bad_request(message: String) -> Response {
    (StatusCode::BAD_REQUEST, Json(ErrorBody { error: message })).into_response()
}

async fn score(State(bundle): State<Arc<ModelBundle>>, body: Bytes) -> Response {
    let req: ScoreRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return bad_request(format!("invalid request body: {e}")),
    };
    let scored = bundle.score(&req.text);
    if !scored.score.is_finite() {
        return (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(ErrorBody {
                error: "model produced a non-finite score".into(),
            }),
        )
            .into_response();
    }
    Json(ScoreResponse {
        score: scored.score,
        cleaned: scored.cleaned,
    })
    .into_response()
}

async fn healthz(State(bundle): State<Arc<ModelBundle>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        model_version: bundle.model_version(),
    })
}

pub fn router(bundle: Arc<ModelBundle>) -> Router {
    Router::new()
        .route("/score", post(score))
        .route("/healthz", get(healthz))
        .with_state(bundle)
}

/// Binds `addr` and serves until the future `shutdown` resolves.
pub async fn serve_until(
    bundle: Arc<ModelBundle>,
    listener: TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(bundle))
        .with_graceful_shutdown(shutdown)
        .await
}

pub async fn bind(addr: SocketAddr) -> std::io::Result<TcpListener> {
    TcpListener::bind(addr).await
}
