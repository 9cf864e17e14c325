//! State-changing requests the bot sends to forges.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{CheckReport, PrRef, RepoRef, Sha, StatusReport};

/// Where PRs are mirrored for CI. The mirror branch of PR `n` is `branch_prefix + n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorTarget {
    pub ci_repo: RepoRef,
    #[serde(default = "default_branch_prefix")]
    pub branch_prefix: String,
}

pub fn default_branch_prefix() -> String {
    "pr-".to_string()
}

impl MirrorTarget {
    pub fn new(ci_repo: RepoRef) -> Self {
        Self {
            ci_repo,
            branch_prefix: default_branch_prefix(),
        }
    }

    pub fn branch_for(&self, number: u64) -> String {
        format!("{}{}", self.branch_prefix, number)
    }

    /// Inverse of [`MirrorTarget::branch_for`].
    pub fn pr_number(&self, branch: &str) -> Option<u64> {
        let digits = branch.strip_prefix(&self.branch_prefix)?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        digits.parse().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ActionKind {
    PostComment {
        pr: PrRef,
        body: String,
    },
    AddLabel {
        pr: PrRef,
        label: String,
    },
    RemoveLabel {
        pr: PrRef,
        label: String,
    },
    /// Milestones are addressed by title; the gateway resolves the id.
    SetMilestone {
        pr: PrRef,
        title: String,
    },
    ClosePr {
        pr: PrRef,
    },
    MergePr {
        pr: PrRef,
        message: String,
    },
    /// Push a fresh merge of the PR head into the current base head to the CI mirror.
    PushBranch {
        pr: PrRef,
        target: MirrorTarget,
    },
    DeleteBranch {
        pr: PrRef,
        target: MirrorTarget,
    },
    ReportCheck {
        repo: RepoRef,
        report: CheckReport,
    },
    ReportStatus {
        repo: RepoRef,
        status: StatusReport,
    },
    CreateCard {
        pr: PrRef,
        board: String,
        column: String,
    },
    MoveCard {
        pr: PrRef,
        board: String,
        column: String,
    },
    DeleteCard {
        pr: PrRef,
        board: String,
    },
    TriggerPipeline {
        ci_repo: RepoRef,
        branch: String,
        variables: BTreeMap<String, String>,
    },
}

impl ActionKind {
    pub fn name(&self) -> &'static str {
        match self {
            ActionKind::PostComment { .. } => "PostComment",
            ActionKind::AddLabel { .. } => "AddLabel",
            ActionKind::RemoveLabel { .. } => "RemoveLabel",
            ActionKind::SetMilestone { .. } => "SetMilestone",
            ActionKind::ClosePr { .. } => "ClosePr",
            ActionKind::MergePr { .. } => "MergePr",
            ActionKind::PushBranch { .. } => "PushBranch",
            ActionKind::DeleteBranch { .. } => "DeleteBranch",
            ActionKind::ReportCheck { .. } => "ReportCheck",
            ActionKind::ReportStatus { .. } => "ReportStatus",
            ActionKind::CreateCard { .. } => "CreateCard",
            ActionKind::MoveCard { .. } => "MoveCard",
            ActionKind::DeleteCard { .. } => "DeleteCard",
            ActionKind::TriggerPipeline { .. } => "TriggerPipeline",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionKind::PostComment { pr, body } => {
                let first = body.lines().find(|l| !l.trim().is_empty() && !l.starts_with("<!--")).unwrap_or("");
                write!(f, "PostComment {pr} {first:?}")
            }
            ActionKind::AddLabel { pr, label } => write!(f, "AddLabel {pr} {label:?}"),
            ActionKind::RemoveLabel { pr, label } => write!(f, "RemoveLabel {pr} {label:?}"),
            ActionKind::SetMilestone { pr, title } => write!(f, "SetMilestone {pr} {title:?}"),
            ActionKind::ClosePr { pr } => write!(f, "ClosePr {pr}"),
            ActionKind::MergePr { pr, message } => {
                write!(f, "MergePr {pr} {:?}", message.lines().next().unwrap_or(""))
            }
            ActionKind::PushBranch { pr, target } => {
                write!(f, "PushBranch {pr} -> {}:{}", target.ci_repo, target.branch_for(pr.number))
            }
            ActionKind::DeleteBranch { pr, target } => {
                write!(f, "DeleteBranch {}:{}", target.ci_repo, target.branch_for(pr.number))
            }
            ActionKind::ReportCheck { repo, report } => write!(
                f,
                "ReportCheck {repo}@{} {:?} {:?}",
                report.target_sha.short(),
                report.name,
                report.conclusion
            ),
            ActionKind::ReportStatus { repo, status } => write!(
                f,
                "ReportStatus {repo}@{} {:?} {:?}",
                status.target_sha.short(),
                status.context,
                status.state
            ),
            ActionKind::CreateCard { pr, board, column } => write!(f, "CreateCard {pr} {board:?}/{column:?}"),
            ActionKind::MoveCard { pr, board, column } => write!(f, "MoveCard {pr} {board:?}/{column:?}"),
            ActionKind::DeleteCard { pr, board } => write!(f, "DeleteCard {pr} {board:?}"),
            ActionKind::TriggerPipeline { ci_repo, branch, variables } => {
                write!(f, "TriggerPipeline {ci_repo}:{branch}")?;
                for (k, v) in variables {
                    write!(f, " {k}={v}")?;
                }
                Ok(())
            }
        }
    }
}

/// Subject prefix of the synthetic merge commits pushed to the CI mirror.
pub const MIRROR_COMMIT_PREFIX: &str = "[bot] CI merge of PR #";

/// Message of the synthetic merge commit testing `head` on top of `base_head`.
pub fn mirror_commit_message(number: u64, head: &Sha, base_branch: &str, base_head: &Sha) -> String {
    format!("{MIRROR_COMMIT_PREFIX}{number}\n\nMerge {head} into {base_branch} ({base_head}).")
}

pub fn is_mirror_commit_message(message: &str) -> bool {
    message.starts_with(MIRROR_COMMIT_PREFIX)
}

/// One state-changing request, tagged with a key that makes replays harmless.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub idempotency_key: String,
    #[serde(flatten)]
    pub kind: ActionKind,
}

impl Action {
    pub fn new(idempotency_key: impl Into<String>, kind: ActionKind) -> Self {
        Self {
            idempotency_key: idempotency_key.into(),
            kind,
        }
    }
}

/// Deterministic key for the `index`-th action a workflow plans for a delivery.
pub fn idempotency_key(workflow: &str, delivery_id: &str, index: usize) -> String {
    format!("{workflow}/{delivery_id}/{index}")
}

/// What a successfully executed action produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ActionOutcome {
    Applied,
    /// The action had no effect because its target state already held.
    NoChange,
    Merged { sha: Sha },
    Pushed { sha: Sha },
    /// The merge commit for a mirror push could not be created.
    Conflict,
}
