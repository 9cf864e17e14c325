//! JSON bodies of the service's operator endpoints, shared by server and client.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::action::Action;

/// `POST /v1/scan`
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanRequest {
    /// Clock override; the server's clock when absent.
    #[serde(default)]
    pub now: Option<DateTime<Utc>>,
    #[serde(default)]
    pub dry_run: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    pub now: DateTime<Utc>,
    pub dry_run: bool,
    /// Executed actions, or the ones that would have been in a dry run.
    pub actions: Vec<Action>,
    /// Workflow failures, one line each.
    pub errors: Vec<String>,
}

/// `POST /v1/replay`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayRequest {
    pub script: String,
    #[serde(default)]
    pub epoch: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    /// The simulator's action log, one entry per line.
    pub log: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub error: String,
    /// Offending script line, for replay errors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}
