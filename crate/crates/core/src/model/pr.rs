use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{PrRef, RepoRef, Sha};

/// Prefix shared by every label that asks the author for an action.
pub const REQUEST_LABEL_PREFIX: &str = "needs: ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrState {
    Open,
    Closed,
    Merged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewDecision {
    Approved,
    ChangesRequested,
    Commented,
}

/// What the forge reports about merging the head into the base branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mergeable {
    Mergeable,
    Conflicting,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MilestoneRef {
    pub id: u64,
    pub title: String,
    #[serde(default)]
    pub description: String,
}

/// Snapshot of a pull request as seen by the bot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullRequest {
    pub repo: RepoRef,
    pub number: u64,
    pub title: String,
    #[serde(default)]
    pub body: String,
    pub author: String,
    pub base_branch: String,
    pub head_sha: Sha,
    pub head_repo: RepoRef,
    #[serde(default)]
    pub draft: bool,
    pub state: PrState,
    #[serde(default)]
    pub labels: BTreeSet<String>,
    #[serde(default)]
    pub milestone: Option<MilestoneRef>,
    #[serde(default)]
    pub assignees: BTreeSet<String>,
    /// Latest decision per reviewer login.
    #[serde(default)]
    pub reviews: BTreeMap<String, ReviewDecision>,
    #[serde(default)]
    pub mergeable: Mergeable,
}

impl PullRequest {
    pub fn pr_ref(&self) -> PrRef {
        PrRef::new(self.repo.clone(), self.number)
    }

    pub fn is_open(&self) -> bool {
        self.state == PrState::Open
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.labels.contains(label)
    }

    /// Reviewers whose latest decision is an approval, in lexicographic order.
    pub fn approvers(&self) -> impl Iterator<Item = &str> {
        self.reviews
            .iter()
            .filter(|(_, d)| **d == ReviewDecision::Approved)
            .map(|(login, _)| login.as_str())
    }

    pub fn request_labels(&self) -> impl Iterator<Item = &str> {
        self.labels
            .iter()
            .map(String::as_str)
            .filter(|l| l.starts_with(REQUEST_LABEL_PREFIX))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub id: u64,
    pub author: String,
    pub body: String,
    pub created_at: DateTime<Utc>,
    pub target: PrRef,
}

/// Identity, parentage and message of a commit. Nothing else of the object graph is modeled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commit {
    pub sha: Sha,
    pub parents: Vec<Sha>,
    pub message: String,
    /// Forge-side annotations such as a signature marker.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotations: Vec<String>,
}

impl Commit {
    pub fn subject(&self) -> &str {
        self.message.lines().next().unwrap_or("")
    }
}
