use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{CiJob, Comment, JobStatus, RepoRef, Sha};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    PrOpened,
    PrSynchronized,
    PrClosed,
    CommentCreated,
    PipelineCompleted,
    JobCompleted,
    PushToBranch,
    CardRemoved,
    ScheduledTick,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PushedCommit {
    pub sha: Sha,
    pub message: String,
}

/// Where a removed card used to sit. Webhooks sometimes only carry the column id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnLocator {
    Named { board: String, column: String },
    Id { column_id: u64 },
}

/// Kind-specific event data. Every variant carries the origin repository so that the
/// affected PR or branch can be located.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventPayload {
    PrOpened {
        repo: RepoRef,
        number: u64,
        head_sha: Sha,
    },
    PrSynchronized {
        repo: RepoRef,
        number: u64,
        head_sha: Sha,
    },
    PrClosed {
        repo: RepoRef,
        number: u64,
        merged: bool,
    },
    CommentCreated {
        comment: Comment,
    },
    PipelineCompleted {
        repo: RepoRef,
        ci_repo: RepoRef,
        pipeline_id: u64,
        branch: String,
        /// PR number recovered from the mirror branch name, when it is one.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pr_number: Option<u64>,
        tested_sha: Sha,
        status: JobStatus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        web_url: Option<String>,
    },
    JobCompleted {
        repo: RepoRef,
        ci_repo: RepoRef,
        branch: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pr_number: Option<u64>,
        job: CiJob,
    },
    PushToBranch {
        repo: RepoRef,
        branch: String,
        after: Sha,
        #[serde(default)]
        commits: Vec<PushedCommit>,
        #[serde(default)]
        pusher: String,
    },
    CardRemoved {
        repo: RepoRef,
        #[serde(flatten)]
        location: ColumnLocator,
        number: u64,
        actor: String,
    },
    ScheduledTick {
        repo: RepoRef,
        at: DateTime<Utc>,
    },
}

/// A normalized webhook delivery or scheduler occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub delivery_id: String,
    pub received_at: DateTime<Utc>,
    pub payload: EventPayload,
}

impl Event {
    pub fn new(delivery_id: impl Into<String>, received_at: DateTime<Utc>, payload: EventPayload) -> Self {
        Self {
            delivery_id: delivery_id.into(),
            received_at,
            payload,
        }
    }

    /// The daily scan occurrence for `repo`; the delivery id is unique per repo and instant.
    pub fn tick(repo: &RepoRef, at: DateTime<Utc>) -> Self {
        Self::new(
            format!("tick-{repo}-{}", at.format("%Y%m%dT%H%M%S")),
            at,
            EventPayload::ScheduledTick { repo: repo.clone(), at },
        )
    }

    pub fn kind(&self) -> EventKind {
        match &self.payload {
            EventPayload::PrOpened { .. } => EventKind::PrOpened,
            EventPayload::PrSynchronized { .. } => EventKind::PrSynchronized,
            EventPayload::PrClosed { .. } => EventKind::PrClosed,
            EventPayload::CommentCreated { .. } => EventKind::CommentCreated,
            EventPayload::PipelineCompleted { .. } => EventKind::PipelineCompleted,
            EventPayload::JobCompleted { .. } => EventKind::JobCompleted,
            EventPayload::PushToBranch { .. } => EventKind::PushToBranch,
            EventPayload::CardRemoved { .. } => EventKind::CardRemoved,
            EventPayload::ScheduledTick { .. } => EventKind::ScheduledTick,
        }
    }

    pub fn repo(&self) -> &RepoRef {
        match &self.payload {
            EventPayload::PrOpened { repo, .. }
            | EventPayload::PrSynchronized { repo, .. }
            | EventPayload::PrClosed { repo, .. }
            | EventPayload::PipelineCompleted { repo, .. }
            | EventPayload::JobCompleted { repo, .. }
            | EventPayload::PushToBranch { repo, .. }
            | EventPayload::CardRemoved { repo, .. }
            | EventPayload::ScheduledTick { repo, .. } => repo,
            EventPayload::CommentCreated { comment } => &comment.target.repo,
        }
    }
}

/// First scan time at `hour`:00 UTC strictly after `now`.
pub fn next_tick(now: DateTime<Utc>, hour: u32) -> Option<DateTime<Utc>> {
    let today = now.date_naive().and_hms_opt(hour, 0, 0)?.and_utc();
    Some(if today > now { today } else { today + chrono::Duration::days(1) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};

    #[test]
    fn ticks_are_strictly_after_now() {
        let at3 = Utc.with_ymd_and_hms(2026, 1, 1, 3, 0, 0).unwrap();
        assert_eq!(next_tick(at3 - Duration::seconds(1), 3), Some(at3));
        assert_eq!(next_tick(at3, 3), Some(at3 + Duration::days(1)));
        assert_eq!(next_tick(at3, 24), None);
    }

    #[test]
    fn tick_delivery_ids() {
        let at = Utc.with_ymd_and_hms(2026, 1, 1, 3, 0, 0).unwrap();
        let e = Event::tick(&"coq/coq".parse().unwrap(), at);
        assert_eq!(e.delivery_id, "tick-coq/coq-20260101T030000");
    }
}
