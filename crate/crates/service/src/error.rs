use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use prefscreen_core::Error;
use serde::Serialize;

/// JSON error body: `{"error": kind, "message": ..., "path": ...}`.
#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, error: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            error,
            message: message.into(),
            path: None,
        }
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", what)
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    pub fn gone() -> Self {
        Self::new(StatusCode::GONE, "gone", "campaign is finished")
    }

    pub fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError {
            path: Some(path.into()),
            ..Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_config", message)
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { path, message } => ApiError::invalid(path, message),
            Error::UnknownPair(p) => ApiError::not_found(format!("unknown pair `{p}`")),
            Error::AlreadyLabeled(p) => ApiError::conflict(format!("pair `{p}` is already labeled")),
            Error::Finished => ApiError::gone(),
            Error::State(m) => ApiError::conflict(m),
            Error::Input(m) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_input", m),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}
