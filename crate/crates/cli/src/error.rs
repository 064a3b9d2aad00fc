//! The wire error shape shared by every endpoint and CLI command.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use vantage_core::{AnalyticsError, ErrorCode, ExploreError, IndexError, IngestError, QueryError, StoreError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub detail: BTreeMap<String, Json>,
}

impl ApiError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        ApiError { code: code.into(), message: message.into(), detail: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: Json) -> Self {
        self.detail.insert(key.into(), value);
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new("BAD_REQUEST", message)
    }

    pub fn unknown_session(id: &str) -> Self {
        Self::new("UNKNOWN_SESSION", format!("no session {id}")).with("session_id", json!(id))
    }

    /// HTTP status for the error code.
    pub fn status(&self) -> u16 {
        match self.code.as_str() {
            "UNKNOWN_SESSION" | "UNKNOWN_VIS_ID" | "UNKNOWN_TEMPLATE" | "UNKNOWN_OP" | "FILE_NOT_FOUND"
            | "UNKNOWN_TABLE" | "NODE_NOT_FOUND" | "NOT_FOUND" => 404,
            "UNRESOLVED_AMBIGUITY" | "STALE_INDEX" | "DUPLICATE_ID" | "DUPLICATE_VIEW_ID" => 409,
            "IO_ERROR" | "REFRESH_FAILED" | "INTERNAL" => 500,
            _ => 400,
        }
    }
}

impl fmt::Display for ApiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

fn from_engine<E: ErrorCode + fmt::Display>(e: &E) -> ApiError {
    ApiError::new(e.code(), e.to_string())
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        from_engine(&e)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let err = from_engine(&e);
        match e {
            StoreError::QuerySyntaxError { offset, .. } => err.with("offset", json!(offset)),
            StoreError::RefreshFailed { view_id, .. } => err.with("view_id", json!(view_id)),
            _ => err,
        }
    }
}

impl From<IndexError> for ApiError {
    fn from(e: IndexError) -> Self {
        from_engine(&e)
    }
}

impl From<AnalyticsError> for ApiError {
    fn from(e: AnalyticsError) -> Self {
        let err = from_engine(&e);
        match e {
            AnalyticsError::NoConvergence { last, .. } => err.with("last", json!(last)),
            _ => err,
        }
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::Store(e) => e.into(),
            QueryError::Analytics(e) => e.into(),
            QueryError::SyntaxError { offset, ref expected, .. } => {
                let exp = json!(expected);
                from_engine(&e).with("offset", json!(offset)).with("expected", exp)
            }
            QueryError::MissingParameter(ref p) | QueryError::TypeMismatch(ref p) => {
                let p = json!(p);
                from_engine(&e).with("parameter", p)
            }
            other => from_engine(&other),
        }
    }
}

impl From<ExploreError> for ApiError {
    fn from(e: ExploreError) -> Self {
        match e {
            ExploreError::Query(q) => q.into(),
            ExploreError::UnknownVisId(id) => from_engine(&e).with("visID", json!(id)),
            ExploreError::UnresolvedAmbiguity(ref p) => {
                let p = json!(p);
                from_engine(&e).with("parameter", p)
            }
            other => from_engine(&other),
        }
    }
}

impl From<serde_json::Error> for ApiError {
    fn from(e: serde_json::Error) -> Self {
        ApiError::bad_request(format!("invalid JSON body: {e}"))
    }
}

impl axum::response::IntoResponse for ApiError {
    fn into_response(self) -> axum::response::Response {
        let status =
            axum::http::StatusCode::from_u16(self.status()).unwrap_or(axum::http::StatusCode::INTERNAL_SERVER_ERROR);
        (status, axum::Json(self)).into_response()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engine_codes_pass_through() {
        let e: ApiError = QueryError::MissingParameter("tagset".into()).into();
        assert_eq!(e.code, "MISSING_PARAMETER");
        assert_eq!(e.detail["parameter"], json!("tagset"));
        assert_eq!(e.status(), 400);
        let e: ApiError = ExploreError::Query(QueryError::Store(StoreError::UnknownTable("x".into()))).into();
        assert_eq!(e.code, "UNKNOWN_TABLE");
        assert_eq!(e.status(), 404);
        let e: ApiError = ExploreError::UnresolvedAmbiguity("interval".into()).into();
        assert_eq!(e.status(), 409);
    }

    #[test]
    fn serializes_flat() {
        let v = serde_json::to_value(ApiError::new("X", "m")).unwrap();
        assert_eq!(v, json!({"code": "X", "message": "m", "detail": {}}));
    }
}
