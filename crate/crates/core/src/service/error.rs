use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::json;

/// Every error body carries one of these codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    InvalidGraph,
    DuplicateName,
    UnknownGraph,
    UnknownRun,
    UnknownAgent,
    UnknownPrebuilt,
    UnboundInput,
    WrongState,
    InvalidFlag,
    EndpointError,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 10] = [
        ErrorCode::InvalidGraph,
        ErrorCode::DuplicateName,
        ErrorCode::UnknownGraph,
        ErrorCode::UnknownRun,
        ErrorCode::UnknownAgent,
        ErrorCode::UnknownPrebuilt,
        ErrorCode::UnboundInput,
        ErrorCode::WrongState,
        ErrorCode::InvalidFlag,
        ErrorCode::EndpointError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::InvalidGraph => "invalid_graph",
            ErrorCode::DuplicateName => "duplicate_name",
            ErrorCode::UnknownGraph => "unknown_graph",
            ErrorCode::UnknownRun => "unknown_run",
            ErrorCode::UnknownAgent => "unknown_agent",
            ErrorCode::UnknownPrebuilt => "unknown_prebuilt",
            ErrorCode::UnboundInput => "unbound_input",
            ErrorCode::WrongState => "wrong_state",
            ErrorCode::InvalidFlag => "invalid_flag",
            ErrorCode::EndpointError => "endpoint_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{} {}: {message}", status.as_u16(), code.as_str())]
pub struct ApiError {
    pub status: StatusCode,
    pub code: ErrorCode,
    pub message: String,
    /// Extra fields merged into the body, such as graph diagnostics.
    pub extra: Option<serde_json::Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            extra: None,
        }
    }

    pub fn bad_request(code: ErrorCode, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_found(code: ErrorCode, what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, format!("{what} not found"))
    }

    pub fn conflict(code: ErrorCode, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, code, message)
    }

    pub fn with_extra(mut self, extra: serde_json::Value) -> Self {
        self.extra = Some(extra);
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({
            "status": self.status.as_u16(),
            "code": self.code.as_str(),
            "message": self.message,
        });
        if let Some(serde_json::Value::Object(extra)) = self.extra {
            body.as_object_mut().expect("object").extend(extra);
        }
        (self.status, Json(body)).into_response()
    }
}
