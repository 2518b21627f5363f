//! Read-only JSON API over a loaded analysis store.
//!
//! Routes:
//! - `GET /api/actions`
//! - `POST /api/sessions`
//! - `POST /api/flow`
//! - `GET /api/sessions/{id}`
//!
//! Static UI assets are served from `/` when a directory is configured.

use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;
use whose_core::filter::ValidationError;
use whose_core::query::{self, encode, FlowQuery, SessionQuery};
use whose_core::AnalysisStore;

/// Overrides the server clock for time-range presets (epoch milliseconds).
pub const NOW_HEADER: &str = "x-whose-now";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub error_code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ApiError {
    fn bad_request(error_code: &'static str, message: String, field: Option<String>) -> ApiError {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            error_code,
            message,
            field,
        }
    }

    fn not_found(message: String) -> ApiError {
        ApiError {
            status: StatusCode::NOT_FOUND,
            error_code: "not_found",
            message,
            field: None,
        }
    }
}

impl From<ValidationError> for ApiError {
    fn from(e: ValidationError) -> ApiError {
        ApiError::bad_request("invalid_field", e.message, Some(e.field))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, json_headers(), encode(&self)).into_response()
    }
}

fn json_headers() -> [(header::HeaderName, &'static str); 1] {
    [(header::CONTENT_TYPE, "application/json")]
}

fn json<T: Serialize>(value: &T) -> Response {
    (json_headers(), encode(value)).into_response()
}

/// Decodes a request body, reporting the JSON path of the offending field.
fn decode<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let mut de = serde_json::Deserializer::from_slice(body);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let field = (path != ".").then_some(path);
        ApiError::bad_request("malformed_request", e.inner().to_string(), field)
    })?;
    de.end()
        .map_err(|e| ApiError::bad_request("malformed_request", e.to_string(), None))?;
    Ok(value)
}

fn request_now(headers: &HeaderMap) -> Result<i64, ApiError> {
    match headers.get(NOW_HEADER) {
        Some(v) => v
            .to_str()
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| {
                ApiError::bad_request(
                    "bad_header",
                    format!("{NOW_HEADER} must be epoch milliseconds"),
                    Some(NOW_HEADER.into()),
                )
            }),
        None => Ok(clock_now()),
    }
}

fn clock_now() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}

type Shared = State<Arc<AnalysisStore>>;

async fn actions(State(store): Shared) -> Response {
    json(&query::action_list(&store))
}

async fn sessions(
    State(store): Shared,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let q: SessionQuery = decode(&body)?;
    let now = request_now(&headers)?;
    Ok(json(&query::run_session_query(&store, &q, now)?))
}

async fn flow(State(store): Shared, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let q: FlowQuery = decode(&body)?;
    let now = request_now(&headers)?;
    Ok(json(&query::run_flow_query(&store, &q, now)?))
}

async fn session_detail(
    State(store): Shared,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let session = store
        .get_session(&id)
        .map_err(|e| ApiError::not_found(format!("no session {:?}", e.0)))?;
    Ok(json(&query::session_detail(&store, session)))
}

async fn unknown_route() -> ApiError {
    ApiError::not_found("no such endpoint".into())
}

pub fn router(store: Arc<AnalysisStore>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/actions", get(actions))
        .route("/api/sessions", post(sessions))
        .route("/api/sessions/{id}", get(session_detail))
        .route("/api/flow", post(flow))
        .with_state(store);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(unknown_route),
    }
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve(
    listener: TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    tracing::info!(addr = ?listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
}

/// Resolves on ctrl-c or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    tracing::info!("shutting down");
}
