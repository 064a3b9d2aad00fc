//! HTTP service and command-line front end for the exploration engine.

pub mod analytics;
pub mod error;
pub mod paging;
pub mod script;
pub mod server;
pub mod snapshot;

pub use error::ApiError;
pub use server::{build_store, router, serve, AppState, ServiceConfig};
