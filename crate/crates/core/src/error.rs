//! Error types for every engine module.
//!
//! Each module owns a dedicated enum. All of them expose a stable, upper-snake
//! error code through [`ErrorCode`], which the service layer forwards verbatim
//! to clients.

use thiserror::Error;

/// Stable machine-readable error code.
pub trait ErrorCode {
    fn code(&self) -> &'static str;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("no records kept after filtering")]
    EmptyCorpus,
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl ErrorCode for IngestError {
    fn code(&self) -> &'static str {
        match self {
            Self::MalformedRecord(_) => "MALFORMED_RECORD",
            Self::FileNotFound(_) => "FILE_NOT_FOUND",
            Self::EmptyCorpus => "EMPTY_CORPUS",
            Self::InvalidConfig(_) => "INVALID_CONFIG",
            Self::Io(_) => "IO_ERROR",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoreError {
    #[error("view id already registered: {0}")]
    DuplicateViewId(String),
    #[error("invalid view definition: {0}")]
    InvalidViewDef(String),
    #[error("search query syntax error at offset {offset}: {message}")]
    QuerySyntaxError { offset: usize, message: String },
    #[error("invalid graph mapping: {0}")]
    InvalidMapping(String),
    #[error("node not found: {0}")]
    NodeNotFound(String),
    #[error("unknown table: {0}")]
    UnknownTable(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("duplicate id: {0}")]
    DuplicateId(String),
    #[error("view refresh failed for {view_id}: {message}")]
    RefreshFailed { view_id: String, message: String },
}

impl ErrorCode for StoreError {
    fn code(&self) -> &'static str {
        match self {
            Self::DuplicateViewId(_) => "DUPLICATE_VIEW_ID",
            Self::InvalidViewDef(_) => "INVALID_VIEW_DEF",
            Self::QuerySyntaxError { .. } => "QUERY_SYNTAX_ERROR",
            Self::InvalidMapping(_) => "INVALID_MAPPING",
            Self::NodeNotFound(_) => "NODE_NOT_FOUND",
            Self::UnknownTable(_) => "UNKNOWN_TABLE",
            Self::SchemaViolation(_) => "SCHEMA_VIOLATION",
            Self::DuplicateId(_) => "DUPLICATE_ID",
            Self::RefreshFailed { .. } => "REFRESH_FAILED",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error("invalid join spec: {0}")]
    InvalidJoinSpec(String),
    #[error("invalid interval [{start}, {end})")]
    InvalidInterval { start: i64, end: i64 },
}

impl ErrorCode for IndexError {
    fn code(&self) -> &'static str {
        match self {
            Self::InvalidJoinSpec(_) => "INVALID_JOIN_SPEC",
            Self::InvalidInterval { .. } => "INVALID_INTERVAL",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("syntax error at offset {offset}: expected {}, found {found}", expected.join(" or "))]
    SyntaxError { offset: usize, expected: Vec<String>, found: String },
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
    #[error("missing parameter: {0}")]
    MissingParameter(String),
    #[error("type mismatch for parameter {0}")]
    TypeMismatch(String),
    #[error("stale index: {0}")]
    StaleIndex(String),
    #[error("column is not numeric: {0}")]
    ColumnNotNumeric(String),
    #[error("unknown template: {0}")]
    UnknownTemplate(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

impl ErrorCode for QueryError {
    fn code(&self) -> &'static str {
        match self {
            Self::SyntaxError { .. } => "SYNTAX_ERROR",
            Self::UnsupportedFeature(_) => "UNSUPPORTED_FEATURE",
            Self::MissingParameter(_) => "MISSING_PARAMETER",
            Self::TypeMismatch(_) => "TYPE_MISMATCH",
            Self::StaleIndex(_) => "STALE_INDEX",
            Self::ColumnNotNumeric(_) => "COLUMN_NOT_NUMERIC",
            Self::UnknownTemplate(_) => "UNKNOWN_TEMPLATE",
            Self::InvalidPlan(_) => "INVALID_PLAN",
            Self::InvalidArgument(_) => "INVALID_ARGUMENT",
            Self::Store(e) => e.code(),
            Self::Index(e) => e.code(),
            Self::Analytics(e) => e.code(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("series too short for window {window} (length {len})")]
    SeriesTooShort { window: usize, len: usize },
    #[error("empty interval set")]
    EmptyIntervalSet,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid topic count: {0}")]
    InvalidK(usize),
    #[error("power iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize, last: crate::analytics::CentralityScores },
    #[error("empty graph")]
    EmptyGraph,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl ErrorCode for AnalyticsError {
    fn code(&self) -> &'static str {
        match self {
            Self::SeriesTooShort { .. } => "SERIES_TOO_SHORT",
            Self::EmptyIntervalSet => "EMPTY_INTERVAL_SET",
            Self::EmptyCorpus => "EMPTY_CORPUS",
            Self::InvalidK(_) => "INVALID_K",
            Self::NoConvergence { .. } => "NO_CONVERGENCE",
            Self::EmptyGraph => "EMPTY_GRAPH",
            Self::InvalidArgument(_) => "INVALID_ARGUMENT",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExploreError {
    #[error("model {d_type} is incompatible with visual type {v_type}")]
    IncompatibleModel { v_type: String, d_type: String },
    #[error("unknown action {action} for {v_type}")]
    UnknownAction { v_type: String, action: String },
    #[error("invalid arguments: {0}")]
    InvalidArguments(String),
    #[error("relation {relation} is not in the vocabulary of {v_type}")]
    UnknownRelation { v_type: String, relation: String },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("unknown template: {0}")]
    UnknownTemplate(String),
    #[error("unresolved ambiguity for parameter {0}")]
    UnresolvedAmbiguity(String),
    #[error("unknown visual object: {0}")]
    UnknownVisId(u64),
    #[error("corrupt archive: {0}")]
    CorruptArchive(String),
    #[error(transparent)]
    Query(#[from] QueryError),
}

impl ErrorCode for ExploreError {
    fn code(&self) -> &'static str {
        match self {
            Self::IncompatibleModel { .. } => "INCOMPATIBLE_MODEL",
            Self::UnknownAction { .. } => "UNKNOWN_ACTION",
            Self::InvalidArguments(_) => "INVALID_ARGUMENTS",
            Self::UnknownRelation { .. } => "UNKNOWN_RELATION",
            Self::SchemaMismatch(_) => "SCHEMA_MISMATCH",
            Self::UnknownTemplate(_) => "UNKNOWN_TEMPLATE",
            Self::UnresolvedAmbiguity(_) => "UNRESOLVED_AMBIGUITY",
            Self::UnknownVisId(_) => "UNKNOWN_VIS_ID",
            Self::CorruptArchive(_) => "CORRUPT_ARCHIVE",
            Self::Query(e) => e.code(),
        }
    }
}
