//! Event scripts: one JSON object per line, each a user operation, a clock advance or a raw
//! webhook event. Blank lines and lines starting with `#` are skipped.

use serde::{Deserialize, Serialize};

use forgebot_core::model::{Artifact, Event, JobStatus, RepoRef, ReviewDecision, StatusState};

fn default_branches() -> Vec<String> {
    vec!["master".to_string()]
}

fn default_base() -> String {
    "master".to_string()
}

fn operator() -> String {
    "operator".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScriptOp {
    CreateRepo {
        repo: RepoRef,
        #[serde(default = "default_branches")]
        branches: Vec<String>,
    },
    AddTeamMember {
        org: String,
        team: String,
        login: String,
    },
    CreateMilestone {
        repo: RepoRef,
        title: String,
        #[serde(default)]
        description: String,
    },
    OpenPr {
        repo: RepoRef,
        #[serde(default)]
        number: Option<u64>,
        title: String,
        #[serde(default)]
        body: String,
        author: String,
        #[serde(default = "default_base")]
        base: String,
        #[serde(default)]
        draft: bool,
        #[serde(default)]
        labels: Vec<String>,
        /// Milestone title.
        #[serde(default)]
        milestone: Option<String>,
        #[serde(default)]
        assignees: Vec<String>,
    },
    /// New head commit on the PR branch.
    PushPr {
        repo: RepoRef,
        number: u64,
        #[serde(default)]
        message: Option<String>,
    },
    PushBranch {
        repo: RepoRef,
        branch: String,
        message: String,
        #[serde(default = "operator")]
        pusher: String,
    },
    /// The PR's current head conflicts with the current head of its base branch.
    DeclareConflict {
        repo: RepoRef,
        number: u64,
    },
    Comment {
        repo: RepoRef,
        number: u64,
        author: String,
        body: String,
    },
    AddLabel {
        repo: RepoRef,
        number: u64,
        label: String,
        #[serde(default = "operator")]
        actor: String,
    },
    RemoveLabel {
        repo: RepoRef,
        number: u64,
        label: String,
        #[serde(default = "operator")]
        actor: String,
    },
    SetMilestone {
        repo: RepoRef,
        number: u64,
        title: Option<String>,
    },
    Review {
        repo: RepoRef,
        number: u64,
        reviewer: String,
        decision: ReviewDecision,
    },
    SetDraft {
        repo: RepoRef,
        number: u64,
        draft: bool,
    },
    /// A status on the PR head set by some other integration.
    SetStatus {
        repo: RepoRef,
        number: u64,
        context: String,
        state: StatusState,
    },
    /// A pipeline over the current head of a CI mirror branch finishes with these jobs.
    CompletePipeline {
        ci_repo: RepoRef,
        branch: String,
        jobs: Vec<JobSpec>,
    },
    /// A user removes a PR's card from a project board.
    DeleteCard {
        repo: RepoRef,
        board: String,
        number: u64,
        actor: String,
    },
    AdvanceClock {
        #[serde(default)]
        days: u64,
        #[serde(default)]
        hours: u64,
        #[serde(default)]
        minutes: u64,
    },
    /// An immediate scheduler tick for a repository.
    Tick {
        repo: RepoRef,
    },
    /// A raw webhook delivery.
    Event {
        event: Event,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub name: String,
    pub status: JobStatus,
    #[serde(default)]
    pub log: String,
    #[serde(default)]
    pub artifacts: Vec<Artifact>,
}

impl JobSpec {
    pub fn new(name: impl Into<String>, status: JobStatus, log: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status,
            log: log.into(),
            artifacts: Vec::new(),
        }
    }
}

impl ScriptOp {
    /// Who performs the operation, for the action log.
    pub fn actor(&self) -> &str {
        match self {
            ScriptOp::OpenPr { author, .. } | ScriptOp::Comment { author, .. } => author,
            ScriptOp::PushBranch { pusher, .. } => pusher,
            ScriptOp::AddLabel { actor, .. } | ScriptOp::RemoveLabel { actor, .. } | ScriptOp::DeleteCard { actor, .. } => {
                actor
            }
            ScriptOp::Review { reviewer, .. } => reviewer,
            ScriptOp::PushPr { .. } => "contributor",
            _ => "operator",
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

pub fn parse_script(text: &str) -> Result<Vec<ScriptOp>, ScriptError> {
    Ok(parse_script_lines(text)?.into_iter().map(|(_, op)| op).collect())
}

/// Like [`parse_script`], keeping the 1-based line number of each op.
pub fn parse_script_lines(text: &str) -> Result<Vec<(usize, ScriptOp)>, ScriptError> {
    let mut ops = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let op = serde_json::from_str(trimmed).map_err(|e| ScriptError {
            line: i + 1,
            message: e.to_string(),
        })?;
        ops.push((i + 1, op));
    }
    Ok(ops)
}

pub fn render_script(ops: &[ScriptOp]) -> String {
    ops.iter()
        .map(|op| serde_json::to_string(op).expect("ops serialize") + "\n")
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_script() {
        assert_eq!(parse_script(""), Ok(Vec::new()));
        assert_eq!(parse_script("\n# comment\n"), Ok(Vec::new()));
    }

    #[test]
    fn corrupt_line_is_cited() {
        let text = "{\"op\":\"tick\",\"repo\":\"o/r\"}\n\n{\"op\":\"tick\"\n";
        assert_eq!(parse_script(text).unwrap_err().line, 3);
    }

    #[test]
    fn unknown_field_is_rejected() {
        let err = parse_script("{\"op\":\"tick\",\"repo\":\"o/r\",\"when\":1}").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.message.contains("when"), "{}", err.message);
    }

    #[test]
    fn round_trip() {
        let ops = vec![
            ScriptOp::CreateRepo {
                repo: "o/r".parse().unwrap(),
                branches: default_branches(),
            },
            ScriptOp::AdvanceClock {
                days: 3,
                hours: 0,
                minutes: 0,
            },
        ];
        assert_eq!(parse_script(&render_script(&ops)).unwrap(), ops);
    }
}
