use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use missingpath_core::collection::IngestStatus;
use missingpath_core::gateway::GatewayError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("unknown collection {0}")]
    UnknownCollection(String),
    #[error("unknown job {0}")]
    UnknownJob(String),
    #[error("collection {collection_id} is not ready")]
    NotReady { collection_id: String, status: IngestStatus },
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Invalid(String),
    #[error("endpoint unreachable: {0}")]
    Unavailable(String),
    #[error(transparent)]
    Core(#[from] missingpath_core::Error),
    #[error("internal error: {0}")]
    Internal(String),
    /// A request body or query string that could not be decoded.
    #[error("{message}")]
    Rejected { status: StatusCode, message: String },
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::Rejected { status: r.status(), message: r.body_text() }
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::Rejected { status: r.status(), message: r.body_text() }
    }
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        use missingpath_core::Error as E;
        match self {
            ApiError::UnknownCollection(_) | ApiError::UnknownJob(_) => StatusCode::NOT_FOUND,
            ApiError::NotReady { .. } | ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
            ApiError::Rejected { status, .. } => *status,
            ApiError::Core(e) => match e {
                E::UnknownPath(_)
                | E::UnknownZone(_)
                | E::UnknownEntity(_)
                | E::NoCurrentSelection
                | E::InvalidQuery(_)
                | E::EmptyQuery
                | E::InvalidConfig(_)
                | E::Unresolved(_)
                | E::LengthMismatch { .. } => StatusCode::UNPROCESSABLE_ENTITY,
                E::NoMap => StatusCode::CONFLICT,
                E::Gateway(GatewayError::Transport(_) | GatewayError::Endpoint { .. }) => {
                    StatusCode::SERVICE_UNAVAILABLE
                }
                E::Gateway(GatewayError::Invalid(_)) => StatusCode::UNPROCESSABLE_ENTITY,
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        let body = match &self {
            ApiError::NotReady { status: ingest, .. } => json!({ "error": self.to_string(), "status": ingest }),
            _ => json!({ "error": self.to_string() }),
        };
        (status, Json(body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
