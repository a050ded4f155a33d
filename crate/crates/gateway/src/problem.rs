//! Problem-detail errors: `{code, message, path}` with a matching status.

use axum::extract::Request;
use axum::http::StatusCode;
use axum::middleware::Next;
use axum::response::{IntoResponse, Response};
use axum::Json;
use knowloop::engine::EngineError;
use knowloop::knowledge::{Conflict, MergeError};
use serde::Serialize;

use crate::store::StoreError;

#[derive(Debug, Clone, Serialize)]
pub struct Problem {
    pub code: String,
    pub message: String,
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conflicts: Option<Vec<Conflict>>,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    pub conflicts: Option<Vec<Conflict>>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.into(),
            message: message.into(),
            conflicts: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid-request", message)
    }

    pub fn not_found(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    /// Status for a domain error code.
    pub fn coded(code: &str, message: impl Into<String>) -> Self {
        let status = match code {
            "missing-principal" | "malformed-principal" | "unknown-role" => StatusCode::UNAUTHORIZED,
            "unauthorized-role" => StatusCode::FORBIDDEN,
            "unknown-model" | "unknown-justification" => StatusCode::NOT_FOUND,
            "model-exists" | "unresolved-conflicts" | "illegal-transition" | "already-terminal" => {
                StatusCode::CONFLICT
            }
            "generator-failure" => StatusCode::BAD_GATEWAY,
            "io-error" | "corrupt-store" => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, code, message)
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let mut err = ApiError::coded(e.code(), e.to_string());
        if let EngineError::Merge(MergeError::UncoveredConflicts(c)) = &e {
            err.conflicts = Some(c.clone());
        }
        err
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Engine(e) => e.into(),
            other => ApiError::coded(other.code(), other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status;
        let mut response = status.into_response();
        response.extensions_mut().insert(self);
        response
    }
}

/// Renders any [`ApiError`] left in a response as a problem body carrying
/// the request path.
pub async fn render_problems(request: Request, next: Next) -> Response {
    let path = request.uri().path().to_owned();
    let response = next.run(request).await;
    match response.extensions().get::<ApiError>().cloned() {
        Some(err) => {
            let body = Problem {
                code: err.code,
                message: err.message,
                path,
                conflicts: err.conflicts,
            };
            (err.status, Json(body)).into_response()
        }
        None => response,
    }
}
