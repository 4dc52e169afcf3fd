//! Workspace persistence, the operations shared by CLI and HTTP, and the
//! axum service exposing the verification endpoints.

pub mod ops;
pub mod server;
pub mod workspace;

pub use ops::OpsError;
pub use workspace::{Workspace, WorkspaceError};

/// Current time from the system clock, for callers that were given no `--now`.
pub fn system_now() -> credbench_core::UnixTime {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}
