//! HTTP front end for carving sessions and propagation jobs.
//!
//! Endpoints (JSON unless noted):
//!
//! | method | path | |
//! |---|---|---|
//! | GET  | `/health` | liveness |
//! | GET  | `/videos` | catalog listing |
//! | GET  | `/videos/{video}/frames/{frame}` | frame PNG |
//! | POST | `/sessions` | `{video, frame, object?, k?, budget?}` |
//! | GET  | `/sessions/{id}` | session and current state |
//! | POST | `/sessions/{id}/clicks` | `{x, y}` in original image pixels |
//! | POST | `/sessions/{id}/undo` | drop the latest click |
//! | POST | `/sessions/{id}/accept` | `{proposal_id, wall_time_s?}` |
//! | GET  | `/sessions/{id}/heatmap.png` | contour heat-map (PNG) |
//! | GET  | `/sessions/{id}/mask.png` | accepted mask (PNG) |
//! | GET  | `/sessions/{id}/proposals/{pid}/overlay.png` | proposal over frame (PNG) |
//! | GET  | `/sessions/{id}/proposals/{pid}/thumbnail.png` | same, long edge 256 px |
//! | POST | `/tracks` | `{video, object?, keyframes: [...], drift_floor?}` |
//! | GET  | `/tracks/{id}` | job status and per-frame overlay urls |
//! | GET  | `/tracks/{id}/frames/{frame}/overlay.png` | track mask over frame (PNG) |
//! | GET  | `/log` | recorded mutating requests, when recording is on |
//!
//! Errors are `{"error": {"code", "category", "message"}}` with status 400,
//! 404, 409, or 500.

pub mod api;
pub mod error;
pub mod state;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request};
use axum::Router;
use tower::ServiceExt;

pub use api::router;
pub use error::{ApiError, ApiResult};
pub use state::{AppState, LoggedRequest, ServerConfig};

/// Response status and JSON body (`null` for non-JSON bodies).
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayResponse {
    pub status: u16,
    pub body: serde_json::Value,
}

/// Send `req` to `app` in process.
pub async fn send(app: &Router, method: Method, path: &str, body: Option<&serde_json::Value>) -> std::io::Result<ReplayResponse> {
    let mut builder = Request::builder().method(method).uri(path);
    let body = match body {
        Some(v) => {
            builder = builder.header("content-type", "application/json");
            Body::from(serde_json::to_vec(v)?)
        }
        None => Body::empty(),
    };
    let req = builder.body(body).map_err(std::io::Error::other)?;
    let resp = app.clone().oneshot(req).await.map_err(std::io::Error::other)?;
    let status = resp.status().as_u16();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX)
        .await
        .map_err(std::io::Error::other)?;
    let body = serde_json::from_slice(&bytes).unwrap_or(serde_json::Value::Null);
    Ok(ReplayResponse { status, body })
}

/// Re-issue a recorded log against `app`, in order.
pub async fn replay(app: &Router, log: &[LoggedRequest]) -> std::io::Result<Vec<ReplayResponse>> {
    let mut out = Vec::with_capacity(log.len());
    for r in log {
        let method = Method::from_bytes(r.method.as_bytes()).map_err(std::io::Error::other)?;
        out.push(send(app, method, &r.path, Some(&r.body)).await?);
    }
    Ok(out)
}

pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
