//! Reusable bot components. Workflows are assembled from these.

/// Event triggers: pick events apart.
pub mod triggers {
    use crate::model::{CiJob, Comment, Event, EventPayload, JobStatus, PushedCommit, RepoRef, Sha};

    pub struct PrUpdate<'a> {
        pub repo: &'a RepoRef,
        pub number: u64,
        pub head_sha: &'a Sha,
    }

    /// PR opened, reopened or pushed to.
    pub fn pr_opened_or_updated(event: &Event) -> Option<PrUpdate<'_>> {
        match &event.payload {
            EventPayload::PrOpened { repo, number, head_sha }
            | EventPayload::PrSynchronized { repo, number, head_sha } => Some(PrUpdate {
                repo,
                number: *number,
                head_sha,
            }),
            _ => None,
        }
    }

    pub fn pr_closed(event: &Event) -> Option<(&RepoRef, u64, bool)> {
        match &event.payload {
            EventPayload::PrClosed { repo, number, merged } => Some((repo, *number, *merged)),
            _ => None,
        }
    }

    pub fn new_comment(event: &Event) -> Option<&Comment> {
        match &event.payload {
            EventPayload::CommentCreated { comment } => Some(comment),
            _ => None,
        }
    }

    pub struct JobDone<'a> {
        pub repo: &'a RepoRef,
        pub ci_repo: &'a RepoRef,
        pub branch: &'a str,
        pub pr_number: Option<u64>,
        pub job: &'a CiJob,
    }

    pub fn job_completed(event: &Event) -> Option<JobDone<'_>> {
        match &event.payload {
            EventPayload::JobCompleted {
                repo,
                ci_repo,
                branch,
                pr_number,
                job,
            } if job.status.is_terminal() => Some(JobDone {
                repo,
                ci_repo,
                branch,
                pr_number: *pr_number,
                job,
            }),
            _ => None,
        }
    }

    pub struct PipelineDone<'a> {
        pub repo: &'a RepoRef,
        pub pipeline_id: u64,
        pub tested_sha: &'a Sha,
        pub status: JobStatus,
        pub web_url: Option<&'a str>,
    }

    pub fn pipeline_completed(event: &Event) -> Option<PipelineDone<'_>> {
        match &event.payload {
            EventPayload::PipelineCompleted {
                repo,
                pipeline_id,
                tested_sha,
                status,
                web_url,
                ..
            } if status.is_terminal() => Some(PipelineDone {
                repo,
                pipeline_id: *pipeline_id,
                tested_sha,
                status: *status,
                web_url: web_url.as_deref(),
            }),
            _ => None,
        }
    }

    pub fn push(event: &Event) -> Option<(&RepoRef, &str, &[PushedCommit])> {
        match &event.payload {
            EventPayload::PushToBranch {
                repo, branch, commits, ..
            } => Some((repo, branch.as_str(), commits.as_slice())),
            _ => None,
        }
    }

    pub fn scheduled_tick(event: &Event) -> Option<(&RepoRef, chrono::DateTime<chrono::Utc>)> {
        match &event.payload {
            EventPayload::ScheduledTick { repo, at } => Some((repo, *at)),
            _ => None,
        }
    }
}

/// State triggers: read-only queries that either produce data or refuse.
pub mod state {
    use crate::action::is_mirror_commit_message;
    use crate::engine::{GuardError, GuardResult};
    use crate::error::GatewayError;
    use crate::gateway::ForgeGateway;
    use crate::model::{CheckConclusion, PrRef, PullRequest, RepoRef, Sha};

    /// The PR, refusing when it does not exist (e.g. a plain issue).
    pub async fn pull_request(gateway: &dyn ForgeGateway, pr: &PrRef) -> GuardResult<PullRequest> {
        match gateway.get_pull_request(pr).await {
            Ok(pr) => Ok(pr),
            Err(GatewayError::NotFound(what)) => Err(GuardError::Refused(format!("no such pull request: {what}"))),
            Err(e) => Err(e.into()),
        }
    }

    pub async fn open_pull_request(gateway: &dyn ForgeGateway, pr: &PrRef) -> GuardResult<PullRequest> {
        let pr = pull_request(gateway, pr).await?;
        if pr.is_open() {
            Ok(pr)
        } else {
            Err(GuardError::Refused(format!("{} is not open", pr.pr_ref())))
        }
    }

    /// Origin commit tested by a bot-made mirror merge commit: its second parent.
    pub async fn origin_of_tested_commit(
        gateway: &dyn ForgeGateway,
        repo: &RepoRef,
        tested: &Sha,
    ) -> GuardResult<Sha> {
        let commit = gateway
            .get_commit(repo, tested)
            .await?
            .ok_or_else(|| GuardError::Refused(format!("commit {tested} unknown")))?;
        if commit.parents.len() != 2 || !is_mirror_commit_message(&commit.message) {
            return Err(GuardError::Refused(format!("commit {tested} was not produced by the bot")));
        }
        Ok(commit.parents[1].clone())
    }

    /// Whether the latest check report named `name` on `sha` is a failure.
    pub async fn last_check_failed(
        gateway: &dyn ForgeGateway,
        repo: &RepoRef,
        sha: &Sha,
        name: &str,
    ) -> GuardResult<bool> {
        let reports = gateway.check_reports(repo, sha).await?;
        Ok(reports
            .iter()
            .rev()
            .find(|r| r.name == name)
            .is_some_and(|r| r.conclusion == CheckConclusion::Failure))
    }
}

/// Action builders.
pub mod actions {
    use crate::action::ActionKind;
    use crate::model::PrRef;

    pub fn comment(pr: &PrRef, body: impl Into<String>) -> ActionKind {
        ActionKind::PostComment {
            pr: pr.clone(),
            body: body.into(),
        }
    }

    pub fn add_label(pr: &PrRef, label: &str) -> ActionKind {
        ActionKind::AddLabel {
            pr: pr.clone(),
            label: label.to_string(),
        }
    }

    pub fn remove_label(pr: &PrRef, label: &str) -> ActionKind {
        ActionKind::RemoveLabel {
            pr: pr.clone(),
            label: label.to_string(),
        }
    }

    pub fn close(pr: &PrRef) -> ActionKind {
        ActionKind::ClosePr { pr: pr.clone() }
    }
}
