//! HTTP service over missing-path collections: ingest, map, summaries, selections,
//! export and interaction logging.

pub mod api;
pub mod error;
pub mod jobs;
pub mod log;
pub mod state;

pub use api::{router, SharedState};
pub use error::{ApiError, ApiResult};
pub use state::AppState;
