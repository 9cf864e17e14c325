use serde::{Deserialize, Serialize};

use super::{PrRef, Sha};

/// Forge limit on the size of a check-run summary.
pub const MAX_SUMMARY_BYTES: usize = 64 * 1024;

/// Marker line inserted where a summary or excerpt lost its head.
pub const TRUNCATION_MARKER: &str = "[... truncated ...]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Pending,
    Running,
    Success,
    Failed,
    Canceled,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Success | JobStatus::Failed | JobStatus::Canceled)
    }
}

/// Opaque handle for fetching a job's full log from the CI forge.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogRef(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CiJob {
    pub id: u64,
    pub pipeline_id: u64,
    pub name: String,
    pub status: JobStatus,
    pub log_ref: LogRef,
    #[serde(default)]
    pub artifacts: Vec<Artifact>,
    pub tested_sha: Sha,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub web_url: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckConclusion {
    Success,
    Failure,
    Neutral,
}

/// A rich per-commit result shown in the forge's checks tab.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub conclusion: CheckConclusion,
    pub title: String,
    summary: String,
    pub target_sha: Sha,
}

impl CheckReport {
    /// Builds a report, truncating the summary from the head so that it fits the forge limit.
    pub fn new(
        name: impl Into<String>,
        conclusion: CheckConclusion,
        title: impl Into<String>,
        summary: impl Into<String>,
        target_sha: Sha,
    ) -> Self {
        Self {
            name: name.into(),
            conclusion,
            title: title.into(),
            summary: truncate_head(&summary.into(), MAX_SUMMARY_BYTES),
            target_sha,
        }
    }

    pub fn summary(&self) -> &str {
        &self.summary
    }
}

/// Keeps the tail of `text` so that the result is at most `limit` bytes, prefixing a marker
/// line when anything was dropped. Cuts happen on line boundaries when possible.
pub fn truncate_head(text: &str, limit: usize) -> String {
    if text.len() <= limit {
        return text.to_string();
    }
    let header = format!("{TRUNCATION_MARKER}\n");
    let budget = limit.saturating_sub(header.len());
    let mut start = text.len() - budget;
    while !text.is_char_boundary(start) {
        start += 1;
    }
    // Prefer starting at the beginning of a line.
    if let Some(nl) = text[start..].find('\n') {
        if start + nl + 1 < text.len() {
            start += nl + 1;
        }
    }
    format!("{header}{}", &text[start..])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusState {
    Pending,
    Success,
    Failure,
    Error,
}

/// A single-state commit status.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusReport {
    pub context: String,
    pub state: StatusState,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_url: Option<String>,
    pub target_sha: Sha,
}

/// Rollup of the required checks on a commit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChecksRollup {
    Success,
    Pending,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoardCard {
    pub board: String,
    pub column: String,
    pub pr: PrRef,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sha() -> Sha {
        Sha::parse(&"ab".repeat(20)).unwrap()
    }

    #[test]
    fn short_summary_untouched() {
        let r = CheckReport::new("job", CheckConclusion::Failure, "t", "line1\nline2", sha());
        assert_eq!(r.summary(), "line1\nline2");
    }

    #[test]
    fn long_summary_keeps_tail_and_final_line() {
        let mut text = String::new();
        for i in 0..20_000 {
            text.push_str(&format!("line number {i}\n"));
        }
        text.push_str("FINAL: the fatal error");
        let r = CheckReport::new("job", CheckConclusion::Failure, "t", text.clone(), sha());
        assert!(r.summary().len() <= MAX_SUMMARY_BYTES);
        assert!(r.summary().starts_with(TRUNCATION_MARKER));
        assert!(r.summary().ends_with("FINAL: the fatal error"));
        let body = r.summary().strip_prefix(&format!("{TRUNCATION_MARKER}\n")).unwrap();
        assert!(text.ends_with(body));
    }

    #[test]
    fn truncation_respects_char_boundaries() {
        let text = "é".repeat(100);
        let out = truncate_head(&text, 51);
        assert!(out.len() <= 51);
        assert!(out.starts_with(TRUNCATION_MARKER));
    }
}
