use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use robovoice::Error as CoreError;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Gone(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Internal(String),
}

pub type ApiResult<T> = std::result::Result<T, ApiError>;

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Gone(_) => StatusCode::GONE,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            ApiError::BadRequest(_) => "bad_request",
            ApiError::NotFound(_) => "not_found",
            ApiError::Conflict(_) => "conflict",
            ApiError::Gone(_) => "complete",
            ApiError::Unprocessable(_) => "invalid_value",
            ApiError::Internal(_) => "internal",
        }
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        use CoreError::*;
        match e {
            ExperimentComplete | ChainComplete(_) => ApiError::Gone(msg),
            NoOpenSlot
            | ParticipantCap(_)
            | DuplicateResponse { .. }
            | NotClaimed(_)
            | NotSlotHolder(_)
            | TagExists(_)
            | TagNotVisible(_)
            | DuplicateFlag { .. }
            | NotAggregated => ApiError::Conflict(msg),
            UnknownTrial(_) | UnknownStimulus(_) => ApiError::NotFound(msg),
            OffGrid(_)
            | OutOfRange { .. }
            | BoundViolation { .. }
            | InvalidRating(_)
            | InvalidStars(_)
            | MalformedTag(_)
            | UnknownDimension(_)
            | UnknownSlider(_)
            | UnknownEffectSlot(_)
            | UnknownFlanger(_)
            | WrongResponseCount { .. }
            | EmptyUtterance => ApiError::Unprocessable(msg),
            Io(_) | Backend(_) => ApiError::Internal(msg),
            _ => ApiError::BadRequest(msg),
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::Internal(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.code(), "message": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}
