//! The one error shape every endpoint returns.
//!
//! Each library error case gets its own `code`; the status only groups them.

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use eyeqa_core::evalkit::EvalError;
use eyeqa_core::index::IndexError;
use eyeqa_core::report::ReportError;
use eyeqa_engine::retrieval::RetrievalError;
use eyeqa_engine::{ChainError, GatewayError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status: status.as_u16(),
            code: code.into(),
            message: message.into(),
        }
    }

    pub fn not_found(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn unauthorized(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthorized", message)
    }

    pub fn invalid(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    pub fn internal(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, code, message)
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {}", self.status, self.code, self.message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            tracing::error!(code = %self.code, "{}", self.message);
        }
        (status, Json(self)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        match r {
            JsonRejection::JsonDataError(e) => Self::invalid("invalid_body", e.body_text()),
            other => Self::new(StatusCode::BAD_REQUEST, "malformed_body", other.body_text()),
        }
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed_query", r.body_text())
    }
}

impl From<EvalError> for ApiError {
    fn from(e: EvalError) -> Self {
        use EvalError::*;
        let msg = e.to_string();
        let (status, code) = match &e {
            UnknownDisease(_) => (422, "unknown_disease"),
            UnknownDomain(_) => (422, "unknown_domain"),
            UnknownDimension(_) => (422, "unknown_dimension"),
            UnknownPersona(_) => (422, "unknown_persona"),
            CategoryMismatch { .. } => (422, "category_mismatch"),
            CountMismatch(_) => (422, "count_mismatch"),
            DuplicateQuestion(_) => (422, "duplicate_question"),
            EmptyQuestion(_) => (422, "empty_question"),
            BadRecord { .. } => (422, "bad_record"),
            InvalidRound(_) => (422, "invalid_round"),
            RoundExists(_) => (409, "round_exists"),
            PairsExist => (409, "pairs_exist"),
            DuplicateItem(_) => (409, "duplicate_item"),
            NoAnswers => (422, "no_answers"),
            NoRaters => (422, "no_raters"),
            OutOfScale { .. } => (422, "out_of_scale"),
            DuplicateRating { .. } => (409, "duplicate_rating"),
            UnknownItem(_) => (404, "unknown_item"),
            UnknownPair(_) => (404, "unknown_pair"),
            UnknownRater(_) => (404, "unknown_rater"),
            Round1Incomplete { .. } => (409, "round1_incomplete"),
            WashoutNotElapsed { .. } => (409, "washout_not_elapsed"),
            MissingRater(_) => (409, "missing_rater"),
            QuestionSetMismatch(_) => (422, "question_set_mismatch"),
            Io { .. } => (500, "store_io"),
            Malformed { .. } => (500, "store_malformed"),
        };
        Self::new(StatusCode::from_u16(status).expect("valid status"), code, msg)
    }
}

impl From<ReportError> for ApiError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Eval(inner) => inner.into(),
            ReportError::IncompleteAggregation(_) => {
                Self::new(StatusCode::CONFLICT, "incomplete_ratings", e.to_string())
            }
            ReportError::UnknownBaseline { .. } => Self::invalid("unknown_baseline", e.to_string()),
            ReportError::Stats(_) => Self::new(StatusCode::CONFLICT, "insufficient_data", e.to_string()),
        }
    }
}

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        use GatewayError::*;
        let msg = e.to_string();
        match &e {
            Timeout { .. } => Self::new(StatusCode::BAD_GATEWAY, "backend_timeout", msg),
            RemoteError { .. } => Self::new(StatusCode::BAD_GATEWAY, "backend_error", msg),
            AuthFailure { .. } => Self::new(StatusCode::BAD_GATEWAY, "backend_auth", msg),
            DimensionDrift { .. } => Self::new(StatusCode::BAD_GATEWAY, "embedding_dimension_drift", msg),
            Transport { .. } => Self::new(StatusCode::BAD_GATEWAY, "backend_unreachable", msg),
            Decode(_) => Self::new(StatusCode::BAD_GATEWAY, "backend_decode", msg),
            InvalidRequest(_) => Self::new(StatusCode::BAD_REQUEST, "invalid_backend_request", msg),
            InvalidConfig(_) => Self::internal("backend_config", msg),
            Transcript { .. } => Self::internal("transcript_io", msg),
        }
    }
}

impl From<IndexError> for ApiError {
    fn from(e: IndexError) -> Self {
        match e {
            IndexError::InvalidK => Self::invalid("invalid_k", e.to_string()),
            other => Self::internal("index_error", other.to_string()),
        }
    }
}

impl From<RetrievalError> for ApiError {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::Gateway(g) => g.into(),
            RetrievalError::Index(i) => i.into(),
            other => Self::internal("retrieval_error", other.to_string()),
        }
    }
}

impl From<ChainError> for ApiError {
    fn from(e: ChainError) -> Self {
        let msg = e.to_string();
        match e {
            ChainError::UnknownVariant(_) => Self::not_found("unknown_variant", msg),
            ChainError::UnknownBackend(_) => Self::internal("unknown_backend", msg),
            ChainError::MissingIndex { .. } => Self::internal("index_unavailable", msg),
            ChainError::EmptyQuestion => Self::invalid("empty_question", msg),
            ChainError::Registry(_) => Self::internal("config_invalid", msg),
            ChainError::Gateway(g) => g.into(),
            ChainError::Retrieval(r) => r.into(),
        }
    }
}
