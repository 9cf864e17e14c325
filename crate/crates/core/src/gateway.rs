//! The seam between workflows and forges.
//!
//! Queries are the state triggers of the trigger-action model: they read forge state and
//! never change it. [`ForgeGateway::execute`] performs actions. Implementations must make
//! every action idempotent under its [`Action::idempotency_key`].

use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use chrono::{DateTime, Utc};

use crate::action::{idempotency_key, Action, ActionKind, ActionOutcome, MirrorTarget};
use crate::error::GatewayError;
use crate::model::{
    BoardCard, CheckReport, ChecksRollup, CiJob, Comment, Commit, LogRef, MilestoneRef, PrRef, PullRequest,
    RepoRef, Sha,
};

pub type GatewayResult<T> = Result<T, GatewayError>;

#[async_trait]
pub trait ForgeGateway: Send + Sync {
    async fn get_pull_request(&self, pr: &PrRef) -> GatewayResult<PullRequest>;

    /// Membership of `login` in `team` of organization `org`. Unknown teams are an error.
    async fn is_team_member(&self, org: &str, team: &str, login: &str) -> GatewayResult<bool>;

    async fn list_open_prs_with_label(&self, repo: &RepoRef, label: &str) -> GatewayResult<Vec<PullRequest>>;

    /// When `label` was most recently applied to the PR, if ever.
    async fn label_applied_since(&self, pr: &PrRef, label: &str) -> GatewayResult<Option<DateTime<Utc>>>;

    /// Comments authored by the bot on the PR whose body contains `marker`, oldest first.
    async fn bot_comments(&self, pr: &PrRef, marker: &str) -> GatewayResult<Vec<Comment>>;

    async fn get_job_log(&self, ci_repo: &RepoRef, log: &LogRef) -> GatewayResult<String>;

    /// Cards on the named board, or `None` when the board does not exist.
    async fn list_board_cards(&self, repo: &RepoRef, board: &str) -> GatewayResult<Option<Vec<BoardCard>>>;

    /// Board and column names of a column id, as carried by some card webhooks.
    async fn resolve_column(&self, repo: &RepoRef, column_id: u64) -> GatewayResult<Option<(String, String)>>;

    async fn get_milestone(&self, repo: &RepoRef, id: u64) -> GatewayResult<MilestoneRef>;

    async fn required_checks_status(&self, repo: &RepoRef, sha: &Sha) -> GatewayResult<ChecksRollup>;

    async fn get_commit(&self, repo: &RepoRef, sha: &Sha) -> GatewayResult<Option<Commit>>;

    /// Check reports attached to a commit, oldest first.
    async fn check_reports(&self, repo: &RepoRef, sha: &Sha) -> GatewayResult<Vec<CheckReport>>;

    /// Jobs of the most recent pipeline that ran on `branch` of the CI repository.
    async fn latest_pipeline_jobs(&self, ci_repo: &RepoRef, branch: &str) -> GatewayResult<Vec<CiJob>>;

    async fn execute(&self, action: &Action) -> GatewayResult<ActionOutcome>;
}

/// Outcome of pushing a synthetic merge commit to the CI mirror.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PushResult {
    Pushed(Sha),
    Conflict,
}

/// Typed wrappers over [`ForgeGateway::execute`] for the two mutations with interesting results.
#[async_trait]
pub trait GatewayExt: ForgeGateway {
    async fn merge_pull_request(&self, pr: &PullRequest, message: &str, key: &str) -> GatewayResult<Sha> {
        let action = Action::new(
            key,
            ActionKind::MergePr {
                pr: pr.pr_ref(),
                message: message.to_string(),
            },
        );
        match self.execute(&action).await? {
            ActionOutcome::Merged { sha } => Ok(sha),
            ActionOutcome::Conflict => Err(GatewayError::MergeConflict),
            other => Err(GatewayError::Protocol(format!("merge returned {other:?}"))),
        }
    }

    async fn push_merged_branch(&self, pr: &PullRequest, target: &MirrorTarget, key: &str) -> GatewayResult<PushResult> {
        let action = Action::new(
            key,
            ActionKind::PushBranch {
                pr: pr.pr_ref(),
                target: target.clone(),
            },
        );
        match self.execute(&action).await? {
            ActionOutcome::Pushed { sha } => Ok(PushResult::Pushed(sha)),
            ActionOutcome::Conflict => Ok(PushResult::Conflict),
            other => Err(GatewayError::Protocol(format!("push returned {other:?}"))),
        }
    }
}

impl<T: ForgeGateway + ?Sized> GatewayExt for T {}

/// Helper for ad-hoc actions issued outside a workflow (operator tooling, tests).
pub fn manual_key(purpose: &str, n: usize) -> String {
    idempotency_key("manual", purpose, n)
}

#[async_trait]
impl<G: ForgeGateway + ?Sized> ForgeGateway for Arc<G> {
    async fn get_pull_request(&self, pr: &PrRef) -> GatewayResult<PullRequest> {
        (**self).get_pull_request(pr).await
    }
    async fn is_team_member(&self, org: &str, team: &str, login: &str) -> GatewayResult<bool> {
        (**self).is_team_member(org, team, login).await
    }
    async fn list_open_prs_with_label(&self, repo: &RepoRef, label: &str) -> GatewayResult<Vec<PullRequest>> {
        (**self).list_open_prs_with_label(repo, label).await
    }
    async fn label_applied_since(&self, pr: &PrRef, label: &str) -> GatewayResult<Option<DateTime<Utc>>> {
        (**self).label_applied_since(pr, label).await
    }
    async fn bot_comments(&self, pr: &PrRef, marker: &str) -> GatewayResult<Vec<Comment>> {
        (**self).bot_comments(pr, marker).await
    }
    async fn get_job_log(&self, ci_repo: &RepoRef, log: &LogRef) -> GatewayResult<String> {
        (**self).get_job_log(ci_repo, log).await
    }
    async fn list_board_cards(&self, repo: &RepoRef, board: &str) -> GatewayResult<Option<Vec<BoardCard>>> {
        (**self).list_board_cards(repo, board).await
    }
    async fn resolve_column(&self, repo: &RepoRef, column_id: u64) -> GatewayResult<Option<(String, String)>> {
        (**self).resolve_column(repo, column_id).await
    }
    async fn get_milestone(&self, repo: &RepoRef, id: u64) -> GatewayResult<MilestoneRef> {
        (**self).get_milestone(repo, id).await
    }
    async fn required_checks_status(&self, repo: &RepoRef, sha: &Sha) -> GatewayResult<ChecksRollup> {
        (**self).required_checks_status(repo, sha).await
    }
    async fn get_commit(&self, repo: &RepoRef, sha: &Sha) -> GatewayResult<Option<Commit>> {
        (**self).get_commit(repo, sha).await
    }
    async fn check_reports(&self, repo: &RepoRef, sha: &Sha) -> GatewayResult<Vec<CheckReport>> {
        (**self).check_reports(repo, sha).await
    }
    async fn latest_pipeline_jobs(&self, ci_repo: &RepoRef, branch: &str) -> GatewayResult<Vec<CiJob>> {
        (**self).latest_pipeline_jobs(ci_repo, branch).await
    }
    async fn execute(&self, action: &Action) -> GatewayResult<ActionOutcome> {
        (**self).execute(action).await
    }
}

/// Passes queries through and records actions instead of executing them.
///
/// Mutations report the optimistic outcome so that dependent plan steps are shown too.
pub struct DryRunGateway<G> {
    inner: G,
    intended: Mutex<Vec<Action>>,
}

impl<G> DryRunGateway<G> {
    pub fn new(inner: G) -> Self {
        Self {
            inner,
            intended: Mutex::new(Vec::new()),
        }
    }

    pub fn intended(&self) -> Vec<Action> {
        self.intended.lock().expect("dry-run log poisoned").clone()
    }

    pub fn into_inner(self) -> G {
        self.inner
    }
}

const PLACEHOLDER_SHA: &str = "0000000000000000000000000000000000000000";

#[async_trait]
impl<G: ForgeGateway> ForgeGateway for DryRunGateway<G> {
    async fn get_pull_request(&self, pr: &PrRef) -> GatewayResult<PullRequest> {
        self.inner.get_pull_request(pr).await
    }
    async fn is_team_member(&self, org: &str, team: &str, login: &str) -> GatewayResult<bool> {
        self.inner.is_team_member(org, team, login).await
    }
    async fn list_open_prs_with_label(&self, repo: &RepoRef, label: &str) -> GatewayResult<Vec<PullRequest>> {
        self.inner.list_open_prs_with_label(repo, label).await
    }
    async fn label_applied_since(&self, pr: &PrRef, label: &str) -> GatewayResult<Option<DateTime<Utc>>> {
        self.inner.label_applied_since(pr, label).await
    }
    async fn bot_comments(&self, pr: &PrRef, marker: &str) -> GatewayResult<Vec<Comment>> {
        self.inner.bot_comments(pr, marker).await
    }
    async fn get_job_log(&self, ci_repo: &RepoRef, log: &LogRef) -> GatewayResult<String> {
        self.inner.get_job_log(ci_repo, log).await
    }
    async fn list_board_cards(&self, repo: &RepoRef, board: &str) -> GatewayResult<Option<Vec<BoardCard>>> {
        self.inner.list_board_cards(repo, board).await
    }
    async fn resolve_column(&self, repo: &RepoRef, column_id: u64) -> GatewayResult<Option<(String, String)>> {
        self.inner.resolve_column(repo, column_id).await
    }
    async fn get_milestone(&self, repo: &RepoRef, id: u64) -> GatewayResult<MilestoneRef> {
        self.inner.get_milestone(repo, id).await
    }
    async fn required_checks_status(&self, repo: &RepoRef, sha: &Sha) -> GatewayResult<ChecksRollup> {
        self.inner.required_checks_status(repo, sha).await
    }
    async fn get_commit(&self, repo: &RepoRef, sha: &Sha) -> GatewayResult<Option<Commit>> {
        self.inner.get_commit(repo, sha).await
    }
    async fn check_reports(&self, repo: &RepoRef, sha: &Sha) -> GatewayResult<Vec<CheckReport>> {
        self.inner.check_reports(repo, sha).await
    }
    async fn latest_pipeline_jobs(&self, ci_repo: &RepoRef, branch: &str) -> GatewayResult<Vec<CiJob>> {
        self.inner.latest_pipeline_jobs(ci_repo, branch).await
    }

    async fn execute(&self, action: &Action) -> GatewayResult<ActionOutcome> {
        self.intended.lock().expect("dry-run log poisoned").push(action.clone());
        let placeholder = Sha::parse(PLACEHOLDER_SHA).expect("valid placeholder");
        Ok(match action.kind {
            ActionKind::MergePr { .. } => ActionOutcome::Merged { sha: placeholder },
            ActionKind::PushBranch { .. } => ActionOutcome::Pushed { sha: placeholder },
            _ => ActionOutcome::Applied,
        })
    }
}
