use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use forgebot_core::action::{Action, ActionKind, ActionOutcome};
use forgebot_core::error::GatewayError;
use forgebot_core::model::{
    BoardCard, CheckConclusion, CheckReport, ChecksRollup, CiJob, ColumnLocator, Comment, Commit, Event, EventPayload,
    JobStatus, Mergeable, MilestoneRef, PrRef, PrState, PullRequest, PushedCommit, RepoRef, Sha, StatusReport,
    StatusState,
};

use crate::script::{JobSpec, ScriptOp};

pub const SIGNATURE_ANNOTATION: &str = "signed-by: simulator";

/// Everything the simulated forge and CI know. Serializes deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub bot_name: String,
    pub epoch: DateTime<Utc>,
    pub clock: DateTime<Utc>,
    pub commits: BTreeMap<Sha, Commit>,
    pub repos: BTreeMap<RepoRef, SimRepo>,
    /// org → team → members.
    pub teams: BTreeMap<String, BTreeMap<String, BTreeSet<String>>>,
    /// Pairs of commits that cannot be merged, in either order.
    pub conflicts: BTreeSet<(Sha, Sha)>,
    /// Whether a declared conflict also holds for descendants of the pair.
    pub propagate_conflicts: bool,
    /// CI repository → (origin repository, mirror branch prefix).
    pub mirrors: BTreeMap<RepoRef, (RepoRef, String)>,
    /// Outcome of every action executed so far, by idempotency key.
    pub applied: BTreeMap<String, ActionOutcome>,
    pub log: Vec<LogEntry>,
    pub next_id: u64,
    #[serde(skip)]
    pub(crate) outbox: Vec<Event>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimRepo {
    pub branches: BTreeMap<String, Sha>,
    pub prs: BTreeMap<u64, PullRequest>,
    pub comments: Vec<Comment>,
    pub label_events: Vec<LabelEvent>,
    pub milestones: BTreeMap<u64, MilestoneRef>,
    pub boards: BTreeMap<String, Vec<Column>>,
    pub statuses: BTreeMap<Sha, Vec<StatusReport>>,
    pub checks: BTreeMap<Sha, Vec<CheckReport>>,
    pub pipelines: BTreeMap<u64, Pipeline>,
    /// Job logs by log reference.
    pub logs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEvent {
    pub number: u64,
    pub label: String,
    pub added: bool,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub id: u64,
    pub name: String,
    pub cards: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pipeline {
    pub id: u64,
    pub branch: String,
    pub tested_sha: Sha,
    pub status: JobStatus,
    pub jobs: Vec<CiJob>,
    #[serde(default)]
    pub variables: BTreeMap<String, String>,
}

/// One recorded mutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub at: DateTime<Utc>,
    pub actor: String,
    pub mutation: Mutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Mutation {
    User { op: ScriptOp },
    Bot { action: Action, outcome: ActionOutcome },
    Clock { to: DateTime<Utc> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MergeResult {
    Merged(Sha),
    Conflict,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SimError {
    #[error("unknown repository {0}")]
    UnknownRepo(RepoRef),
    #[error("unknown pull request {0}")]
    UnknownPr(PrRef),
    #[error("unknown commit {0}")]
    UnknownSha(Sha),
    #[error("unknown branch {branch} in {repo}")]
    UnknownBranch { repo: RepoRef, branch: String },
    #[error("{0}")]
    Invalid(String),
}

impl From<SimError> for GatewayError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Invalid(m) => GatewayError::Invalid(m),
            other => GatewayError::NotFound(other.to_string()),
        }
    }
}

fn sim_url(repo: &RepoRef, kind: &str, id: u64) -> String {
    format!("https://ci.sim/{repo}/-/{kind}/{id}")
}

impl SimState {
    pub fn new(bot_name: &str, epoch: DateTime<Utc>) -> Self {
        Self {
            bot_name: bot_name.to_string(),
            epoch,
            clock: epoch,
            commits: BTreeMap::new(),
            repos: BTreeMap::new(),
            teams: BTreeMap::new(),
            conflicts: BTreeSet::new(),
            propagate_conflicts: false,
            mirrors: BTreeMap::new(),
            applied: BTreeMap::new(),
            log: Vec::new(),
            next_id: 1,
            outbox: Vec::new(),
        }
    }

    fn fresh_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn emit(&mut self, payload: EventPayload) {
        let id = self.fresh_id();
        self.outbox.push(Event::new(format!("sim-{id}"), self.clock, payload));
    }

    pub(crate) fn take_events(&mut self) -> Vec<Event> {
        std::mem::take(&mut self.outbox)
    }

    pub(crate) fn record(&mut self, actor: &str, mutation: Mutation) {
        self.log.push(LogEntry {
            at: self.clock,
            actor: actor.to_string(),
            mutation,
        });
    }

    pub fn set_clock(&mut self, to: DateTime<Utc>) {
        assert!(to >= self.clock, "the simulated clock never goes back");
        if to != self.clock {
            self.clock = to;
            self.record("clock", Mutation::Clock { to });
        }
    }

    pub fn repo(&self, repo: &RepoRef) -> Result<&SimRepo, SimError> {
        self.repos.get(repo).ok_or_else(|| SimError::UnknownRepo(repo.clone()))
    }

    fn repo_mut(&mut self, repo: &RepoRef) -> Result<&mut SimRepo, SimError> {
        self.repos.get_mut(repo).ok_or_else(|| SimError::UnknownRepo(repo.clone()))
    }

    pub fn pr(&self, pr: &PrRef) -> Result<&PullRequest, SimError> {
        self.repo(&pr.repo)?
            .prs
            .get(&pr.number)
            .ok_or_else(|| SimError::UnknownPr(pr.clone()))
    }

    fn pr_mut(&mut self, pr: &PrRef) -> Result<&mut PullRequest, SimError> {
        self.repos
            .get_mut(&pr.repo)
            .and_then(|r| r.prs.get_mut(&pr.number))
            .ok_or_else(|| SimError::UnknownPr(pr.clone()))
    }

    pub fn branch_head(&self, repo: &RepoRef, branch: &str) -> Result<Sha, SimError> {
        self.repo(repo)?
            .branches
            .get(branch)
            .cloned()
            .ok_or_else(|| SimError::UnknownBranch {
                repo: repo.clone(),
                branch: branch.to_string(),
            })
    }

    /// Adds a commit to the DAG. Shas hash the content and a sequence number.
    pub fn new_commit(&mut self, parents: Vec<Sha>, message: &str, annotations: Vec<String>) -> Sha {
        let seq = self.fresh_id();
        let mut hasher = Sha256::new();
        hasher.update(seq.to_be_bytes());
        for p in &parents {
            hasher.update(p.as_str());
        }
        hasher.update(message);
        let digest = hex::encode(hasher.finalize());
        let sha = Sha::parse(&digest[..40]).expect("hex digest");
        self.commits.insert(
            sha.clone(),
            Commit {
                sha: sha.clone(),
                parents,
                message: message.to_string(),
                annotations,
            },
        );
        sha
    }

    fn is_ancestor_or_self(&self, ancestor: &Sha, of: &Sha) -> bool {
        let mut stack = vec![of.clone()];
        let mut seen = BTreeSet::new();
        while let Some(sha) = stack.pop() {
            if &sha == ancestor {
                return true;
            }
            if seen.insert(sha.clone()) {
                if let Some(c) = self.commits.get(&sha) {
                    stack.extend(c.parents.iter().cloned());
                }
            }
        }
        false
    }

    pub fn conflicting(&self, a: &Sha, b: &Sha) -> bool {
        if self.conflicts.contains(&(a.clone(), b.clone())) || self.conflicts.contains(&(b.clone(), a.clone())) {
            return true;
        }
        self.propagate_conflicts
            && self.conflicts.iter().any(|(x, y)| {
                (self.is_ancestor_or_self(x, a) && self.is_ancestor_or_self(y, b))
                    || (self.is_ancestor_or_self(x, b) && self.is_ancestor_or_self(y, a))
            })
    }

    /// Merge commit with parents `[base_head, pr_head]`, or `Conflict` for a declared pair.
    pub fn simulate_merge(
        &mut self,
        base_head: &Sha,
        pr_head: &Sha,
        message: &str,
        annotations: Vec<String>,
    ) -> Result<MergeResult, SimError> {
        for sha in [base_head, pr_head] {
            if !self.commits.contains_key(sha) {
                return Err(SimError::UnknownSha(sha.clone()));
            }
        }
        if self.conflicting(base_head, pr_head) {
            return Ok(MergeResult::Conflict);
        }
        let sha = self.new_commit(vec![base_head.clone(), pr_head.clone()], message, annotations);
        Ok(MergeResult::Merged(sha))
    }

    /// The PR as a forge would return it, with mergeability computed.
    pub fn pr_view(&self, pr: &PrRef) -> Result<PullRequest, SimError> {
        let mut view = self.pr(pr)?.clone();
        if view.is_open() {
            let base = self.branch_head(&pr.repo, &view.base_branch)?;
            view.mergeable = if self.conflicting(&base, &view.head_sha) {
                Mergeable::Conflicting
            } else {
                Mergeable::Mergeable
            };
        }
        Ok(view)
    }

    pub fn required_checks(&self, repo: &RepoRef, sha: &Sha) -> Result<ChecksRollup, SimError> {
        let r = self.repo(repo)?;
        let mut latest_status: BTreeMap<&str, StatusState> = BTreeMap::new();
        for s in r.statuses.get(sha).into_iter().flatten() {
            latest_status.insert(&s.context, s.state);
        }
        let mut latest_check: BTreeMap<&str, CheckConclusion> = BTreeMap::new();
        for c in r.checks.get(sha).into_iter().flatten() {
            latest_check.insert(&c.name, c.conclusion);
        }
        if latest_status.is_empty() && latest_check.is_empty() {
            return Ok(ChecksRollup::Pending);
        }
        let failed = latest_status
            .values()
            .any(|s| matches!(s, StatusState::Failure | StatusState::Error))
            || latest_check.values().any(|c| *c == CheckConclusion::Failure);
        Ok(if failed {
            ChecksRollup::Failure
        } else if latest_status.values().any(|s| *s == StatusState::Pending) {
            ChecksRollup::Pending
        } else {
            ChecksRollup::Success
        })
    }

    pub fn board_cards(&self, repo: &RepoRef, board: &str) -> Result<Option<Vec<BoardCard>>, SimError> {
        let Some(columns) = self.repo(repo)?.boards.get(board) else {
            return Ok(None);
        };
        Ok(Some(
            columns
                .iter()
                .flat_map(|c| {
                    c.cards.iter().map(|n| BoardCard {
                        board: board.to_string(),
                        column: c.name.clone(),
                        pr: PrRef::new(repo.clone(), *n),
                    })
                })
                .collect(),
        ))
    }

    fn column_mut(&mut self, repo: &RepoRef, board: &str, column: &str) -> Result<&mut Column, SimError> {
        if !self.repo(repo)?.boards.get(board).is_some_and(|b| b.iter().any(|c| c.name == column)) {
            let id = self.fresh_id();
            self.repo_mut(repo)?.boards.entry(board.to_string()).or_default().push(Column {
                id,
                name: column.to_string(),
                cards: Vec::new(),
            });
        }
        Ok(self
            .repo_mut(repo)?
            .boards
            .get_mut(board)
            .and_then(|b| b.iter_mut().find(|c| c.name == column))
            .expect("column just ensured"))
    }

    /// Removes the PR's card from the board; returns the column it was in.
    fn take_card(&mut self, repo: &RepoRef, board: &str, number: u64) -> Result<Option<Column>, SimError> {
        let Some(columns) = self.repo_mut(repo)?.boards.get_mut(board) else {
            return Ok(None);
        };
        for column in columns.iter_mut() {
            if let Some(pos) = column.cards.iter().position(|n| *n == number) {
                column.cards.remove(pos);
                return Ok(Some(column.clone()));
            }
        }
        Ok(None)
    }

    fn set_label(&mut self, pr: &PrRef, label: &str, added: bool) -> Result<bool, SimError> {
        let at = self.clock;
        let state = self.pr_mut(pr)?;
        let changed = if added {
            state.labels.insert(label.to_string())
        } else {
            state.labels.remove(label)
        };
        if changed {
            self.repo_mut(&pr.repo)?.label_events.push(LabelEvent {
                number: pr.number,
                label: label.to_string(),
                added,
                at,
            });
        }
        Ok(changed)
    }

    fn add_comment(&mut self, pr: &PrRef, author: &str, body: &str) -> Result<(), SimError> {
        self.pr(pr)?;
        let comment = Comment {
            id: self.fresh_id(),
            author: author.to_string(),
            body: body.to_string(),
            created_at: self.clock,
            target: pr.clone(),
        };
        self.repo_mut(&pr.repo)?.comments.push(comment.clone());
        self.emit(EventPayload::CommentCreated { comment });
        Ok(())
    }

    fn milestone_by_title(&self, repo: &RepoRef, title: &str) -> Result<MilestoneRef, SimError> {
        self.repo(repo)?
            .milestones
            .values()
            .find(|m| m.title == title)
            .cloned()
            .ok_or_else(|| SimError::Invalid(format!("no milestone titled {title:?} in {repo}")))
    }

    fn push_commit(&mut self, repo: &RepoRef, branch: &str, message: &str, pusher: &str) -> Result<Sha, SimError> {
        let parent = self.branch_head(repo, branch)?;
        let sha = self.new_commit(vec![parent], message, Vec::new());
        self.repo_mut(repo)?.branches.insert(branch.to_string(), sha.clone());
        self.emit(EventPayload::PushToBranch {
            repo: repo.clone(),
            branch: branch.to_string(),
            after: sha.clone(),
            commits: vec![PushedCommit {
                sha: sha.clone(),
                message: message.to_string(),
            }],
            pusher: pusher.to_string(),
        });
        Ok(sha)
    }

    /// Executes a bot action, at most once per idempotency key.
    pub fn apply_action(&mut self, action: &Action) -> Result<ActionOutcome, GatewayError> {
        if let Some(outcome) = self.applied.get(&action.idempotency_key) {
            return Ok(outcome.clone());
        }
        let outcome = self.perform(&action.kind)?;
        self.applied.insert(action.idempotency_key.clone(), outcome.clone());
        let bot = self.bot_name.clone();
        self.record(
            &bot,
            Mutation::Bot {
                action: action.clone(),
                outcome: outcome.clone(),
            },
        );
        Ok(outcome)
    }

    fn perform(&mut self, kind: &ActionKind) -> Result<ActionOutcome, GatewayError> {
        let bot = self.bot_name.clone();
        let changed = |c: bool| if c { ActionOutcome::Applied } else { ActionOutcome::NoChange };
        Ok(match kind {
            ActionKind::PostComment { pr, body } => {
                self.add_comment(pr, &bot, body)?;
                ActionOutcome::Applied
            }
            ActionKind::AddLabel { pr, label } => changed(self.set_label(pr, label, true)?),
            ActionKind::RemoveLabel { pr, label } => changed(self.set_label(pr, label, false)?),
            ActionKind::SetMilestone { pr, title } => {
                let milestone = self.milestone_by_title(&pr.repo, title)?;
                let state = self.pr_mut(pr)?;
                let c = state.milestone.as_ref() != Some(&milestone);
                state.milestone = Some(milestone);
                changed(c)
            }
            ActionKind::ClosePr { pr } => {
                let state = self.pr_mut(pr)?;
                if !state.is_open() {
                    ActionOutcome::NoChange
                } else {
                    state.state = PrState::Closed;
                    self.emit(EventPayload::PrClosed {
                        repo: pr.repo.clone(),
                        number: pr.number,
                        merged: false,
                    });
                    ActionOutcome::Applied
                }
            }
            ActionKind::MergePr { pr, message } => {
                let state = self.pr(pr)?.clone();
                if !state.is_open() {
                    return Err(GatewayError::Invalid(format!("{pr} is not open")));
                }
                let base = self.branch_head(&pr.repo, &state.base_branch)?;
                match self.simulate_merge(&base, &state.head_sha, message, vec![SIGNATURE_ANNOTATION.into()])? {
                    MergeResult::Conflict => ActionOutcome::Conflict,
                    MergeResult::Merged(sha) => {
                        self.repo_mut(&pr.repo)?
                            .branches
                            .insert(state.base_branch.clone(), sha.clone());
                        self.pr_mut(pr)?.state = PrState::Merged;
                        self.emit(EventPayload::PrClosed {
                            repo: pr.repo.clone(),
                            number: pr.number,
                            merged: true,
                        });
                        self.emit(EventPayload::PushToBranch {
                            repo: pr.repo.clone(),
                            branch: state.base_branch.clone(),
                            after: sha.clone(),
                            commits: vec![PushedCommit {
                                sha: sha.clone(),
                                message: message.clone(),
                            }],
                            pusher: bot,
                        });
                        ActionOutcome::Merged { sha }
                    }
                }
            }
            ActionKind::PushBranch { pr, target } => {
                let state = self.pr(pr)?.clone();
                let base = self.branch_head(&pr.repo, &state.base_branch)?;
                let message = forgebot_core::action::mirror_commit_message(
                    pr.number,
                    &state.head_sha,
                    &state.base_branch,
                    &base,
                );
                match self.simulate_merge(&base, &state.head_sha, &message, Vec::new())? {
                    MergeResult::Conflict => ActionOutcome::Conflict,
                    MergeResult::Merged(sha) => {
                        self.repos
                            .entry(target.ci_repo.clone())
                            .or_default()
                            .branches
                            .insert(target.branch_for(pr.number), sha.clone());
                        ActionOutcome::Pushed { sha }
                    }
                }
            }
            ActionKind::DeleteBranch { pr, target } => {
                let removed = self
                    .repos
                    .get_mut(&target.ci_repo)
                    .and_then(|r| r.branches.remove(&target.branch_for(pr.number)));
                changed(removed.is_some())
            }
            ActionKind::ReportCheck { repo, report } => {
                self.repo_mut(repo)?
                    .checks
                    .entry(report.target_sha.clone())
                    .or_default()
                    .push(report.clone());
                ActionOutcome::Applied
            }
            ActionKind::ReportStatus { repo, status } => {
                self.repo_mut(repo)?
                    .statuses
                    .entry(status.target_sha.clone())
                    .or_default()
                    .push(status.clone());
                ActionOutcome::Applied
            }
            ActionKind::CreateCard { pr, board, column } => {
                if self.board_cards(&pr.repo, board)?.unwrap_or_default().iter().any(|c| c.pr == *pr) {
                    ActionOutcome::NoChange
                } else {
                    self.column_mut(&pr.repo, board, column)?.cards.push(pr.number);
                    ActionOutcome::Applied
                }
            }
            ActionKind::MoveCard { pr, board, column } => match self.take_card(&pr.repo, board, pr.number)? {
                None => return Err(GatewayError::NotFound(format!("no card for {pr} on {board:?}"))),
                Some(from) => {
                    self.column_mut(&pr.repo, board, column)?.cards.push(pr.number);
                    changed(from.name != *column)
                }
            },
            ActionKind::DeleteCard { pr, board } => match self.take_card(&pr.repo, board, pr.number)? {
                None => ActionOutcome::NoChange,
                Some(from) => {
                    self.emit(EventPayload::CardRemoved {
                        repo: pr.repo.clone(),
                        location: ColumnLocator::Named {
                            board: board.clone(),
                            column: from.name,
                        },
                        number: pr.number,
                        actor: bot,
                    });
                    ActionOutcome::Applied
                }
            },
            ActionKind::TriggerPipeline {
                ci_repo,
                branch,
                variables,
            } => {
                let tested_sha = self.branch_head(ci_repo, branch)?;
                let id = self.fresh_id();
                self.repo_mut(ci_repo)?.pipelines.insert(
                    id,
                    Pipeline {
                        id,
                        branch: branch.clone(),
                        tested_sha,
                        status: JobStatus::Pending,
                        jobs: Vec::new(),
                        variables: variables.clone(),
                    },
                );
                ActionOutcome::Applied
            }
        })
    }

    /// Applies a user or operator mutation and queues the webhooks it causes.
    pub fn apply_op(&mut self, op: &ScriptOp) -> Result<(), SimError> {
        match op {
            ScriptOp::CreateRepo { repo, branches } => {
                if self.repos.contains_key(repo) {
                    return Err(SimError::Invalid(format!("repository {repo} already exists")));
                }
                let root = self.new_commit(Vec::new(), &format!("Initial commit of {repo}"), Vec::new());
                let r = self.repos.entry(repo.clone()).or_default();
                for b in branches {
                    r.branches.insert(b.clone(), root.clone());
                }
            }
            ScriptOp::AddTeamMember { org, team, login } => {
                self.teams
                    .entry(org.clone())
                    .or_default()
                    .entry(team.clone())
                    .or_default()
                    .insert(login.clone());
            }
            ScriptOp::CreateMilestone {
                repo,
                title,
                description,
            } => {
                let id = self.fresh_id();
                self.repo_mut(repo)?.milestones.insert(
                    id,
                    MilestoneRef {
                        id,
                        title: title.clone(),
                        description: description.clone(),
                    },
                );
            }
            ScriptOp::OpenPr {
                repo,
                number,
                title,
                body,
                author,
                base,
                draft,
                labels,
                milestone,
                assignees,
            } => {
                let number = match number {
                    Some(n) => *n,
                    None => self.repo(repo)?.prs.keys().last().map_or(1, |n| n + 1),
                };
                if self.repo(repo)?.prs.contains_key(&number) {
                    return Err(SimError::Invalid(format!("{repo}#{number} already exists")));
                }
                let milestone = milestone
                    .as_deref()
                    .map(|t| self.milestone_by_title(repo, t))
                    .transpose()?;
                let parent = self.branch_head(repo, base)?;
                let head = self.new_commit(vec![parent], title, Vec::new());
                let pr = PullRequest {
                    repo: repo.clone(),
                    number,
                    title: title.clone(),
                    body: body.clone(),
                    author: author.clone(),
                    base_branch: base.clone(),
                    head_sha: head.clone(),
                    head_repo: repo.clone(),
                    draft: *draft,
                    state: PrState::Open,
                    labels: BTreeSet::new(),
                    milestone,
                    assignees: assignees.iter().cloned().collect(),
                    reviews: BTreeMap::new(),
                    mergeable: Mergeable::Unknown,
                };
                self.repo_mut(repo)?.prs.insert(number, pr);
                let pr_ref = PrRef::new(repo.clone(), number);
                for label in labels {
                    self.set_label(&pr_ref, label, true)?;
                }
                self.emit(EventPayload::PrOpened {
                    repo: repo.clone(),
                    number,
                    head_sha: head,
                });
            }
            ScriptOp::PushPr { repo, number, message } => {
                let pr_ref = PrRef::new(repo.clone(), *number);
                let old = self.pr(&pr_ref)?.head_sha.clone();
                let message = message.clone().unwrap_or_else(|| format!("Update PR #{number}"));
                let head = self.new_commit(vec![old], &message, Vec::new());
                self.pr_mut(&pr_ref)?.head_sha = head.clone();
                self.emit(EventPayload::PrSynchronized {
                    repo: repo.clone(),
                    number: *number,
                    head_sha: head,
                });
            }
            ScriptOp::PushBranch {
                repo,
                branch,
                message,
                pusher,
            } => {
                self.push_commit(repo, branch, message, pusher)?;
            }
            ScriptOp::DeclareConflict { repo, number } => {
                let pr = self.pr(&PrRef::new(repo.clone(), *number))?.clone();
                let base = self.branch_head(repo, &pr.base_branch)?;
                self.conflicts.insert((base, pr.head_sha));
            }
            ScriptOp::Comment {
                repo,
                number,
                author,
                body,
            } => self.add_comment(&PrRef::new(repo.clone(), *number), author, body)?,
            ScriptOp::AddLabel { repo, number, label, .. } => {
                self.set_label(&PrRef::new(repo.clone(), *number), label, true)?;
            }
            ScriptOp::RemoveLabel { repo, number, label, .. } => {
                self.set_label(&PrRef::new(repo.clone(), *number), label, false)?;
            }
            ScriptOp::SetMilestone { repo, number, title } => {
                let milestone = title.as_deref().map(|t| self.milestone_by_title(repo, t)).transpose()?;
                self.pr_mut(&PrRef::new(repo.clone(), *number))?.milestone = milestone;
            }
            ScriptOp::Review {
                repo,
                number,
                reviewer,
                decision,
            } => {
                self.pr_mut(&PrRef::new(repo.clone(), *number))?
                    .reviews
                    .insert(reviewer.clone(), *decision);
            }
            ScriptOp::SetDraft { repo, number, draft } => {
                self.pr_mut(&PrRef::new(repo.clone(), *number))?.draft = *draft;
            }
            ScriptOp::SetStatus {
                repo,
                number,
                context,
                state,
            } => {
                let sha = self.pr(&PrRef::new(repo.clone(), *number))?.head_sha.clone();
                self.repo_mut(repo)?.statuses.entry(sha.clone()).or_default().push(StatusReport {
                    context: context.clone(),
                    state: *state,
                    description: String::new(),
                    target_url: None,
                    target_sha: sha,
                });
            }
            ScriptOp::CompletePipeline { ci_repo, branch, jobs } => self.complete_pipeline(ci_repo, branch, jobs)?,
            ScriptOp::DeleteCard {
                repo,
                board,
                number,
                actor,
            } => {
                let Some(from) = self.take_card(repo, board, *number)? else {
                    return Err(SimError::Invalid(format!("no card for #{number} on {board:?}")));
                };
                self.emit(EventPayload::CardRemoved {
                    repo: repo.clone(),
                    location: ColumnLocator::Id { column_id: from.id },
                    number: *number,
                    actor: actor.clone(),
                });
            }
            ScriptOp::AdvanceClock { .. } | ScriptOp::Tick { .. } | ScriptOp::Event { .. } => {
                return Err(SimError::Invalid("scheduling ops are handled by the runner".into()));
            }
        }
        let actor = op.actor().to_string();
        self.record(&actor, Mutation::User { op: op.clone() });
        Ok(())
    }

    fn complete_pipeline(&mut self, ci_repo: &RepoRef, branch: &str, jobs: &[JobSpec]) -> Result<(), SimError> {
        let (origin, prefix) = self
            .mirrors
            .get(ci_repo)
            .cloned()
            .ok_or_else(|| SimError::Invalid(format!("{ci_repo} is not a registered CI mirror")))?;
        let tested_sha = self.branch_head(ci_repo, branch)?;
        let pr_number = branch
            .strip_prefix(&prefix)
            .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|d| d.parse().ok());
        let pipeline_id = self.fresh_id();
        let mut built = Vec::new();
        for spec in jobs {
            let id = self.fresh_id();
            built.push(CiJob {
                id,
                pipeline_id,
                name: spec.name.clone(),
                status: spec.status,
                log_ref: forgebot_core::model::LogRef(id.to_string()),
                artifacts: spec.artifacts.clone(),
                tested_sha: tested_sha.clone(),
                web_url: Some(sim_url(ci_repo, "jobs", id)),
            });
            self.repo_mut(ci_repo)?.logs.insert(id.to_string(), spec.log.clone());
        }
        let status = if built.iter().any(|j| j.status == JobStatus::Failed) {
            JobStatus::Failed
        } else if built.iter().any(|j| j.status == JobStatus::Canceled) {
            JobStatus::Canceled
        } else {
            JobStatus::Success
        };
        self.repo_mut(ci_repo)?.pipelines.insert(
            pipeline_id,
            Pipeline {
                id: pipeline_id,
                branch: branch.to_string(),
                tested_sha: tested_sha.clone(),
                status,
                jobs: built.clone(),
                variables: BTreeMap::new(),
            },
        );
        for job in built {
            self.emit(EventPayload::JobCompleted {
                repo: origin.clone(),
                ci_repo: ci_repo.clone(),
                branch: branch.to_string(),
                pr_number,
                job,
            });
        }
        self.emit(EventPayload::PipelineCompleted {
            repo: origin,
            ci_repo: ci_repo.clone(),
            pipeline_id,
            branch: branch.to_string(),
            pr_number,
            tested_sha,
            status,
            web_url: Some(sim_url(ci_repo, "pipelines", pipeline_id)),
        });
        Ok(())
    }

    /// Everything except the mutation log, for comparing states reached by different schedules.
    pub fn world_json(&self) -> String {
        let mut copy = self.clone();
        copy.log.clear();
        serde_json::to_string(&copy).expect("state serializes")
    }

    pub fn snapshot_json(&self) -> String {
        serde_json::to_string(self).expect("state serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn state_with_repo() -> (SimState, RepoRef) {
        let mut s = SimState::new("bot", Utc.with_ymd_and_hms(2026, 1, 1, 0, 0, 0).unwrap());
        let repo: RepoRef = "o/r".parse().unwrap();
        s.apply_op(&ScriptOp::CreateRepo {
            repo: repo.clone(),
            branches: vec!["master".into()],
        })
        .unwrap();
        (s, repo)
    }

    #[test]
    fn merge_has_base_then_head_parents() {
        let (mut s, repo) = state_with_repo();
        let base = s.branch_head(&repo, "master").unwrap();
        let head = s.new_commit(vec![base.clone()], "work", Vec::new());
        let MergeResult::Merged(m) = s.simulate_merge(&base, &head, "msg", Vec::new()).unwrap() else {
            panic!("expected merge");
        };
        assert_eq!(s.commits[&m].parents, vec![base, head]);
        assert_eq!(s.commits[&m].message, "msg");
    }

    #[test]
    fn declared_conflict_is_symmetric() {
        let (mut s, repo) = state_with_repo();
        let base = s.branch_head(&repo, "master").unwrap();
        let head = s.new_commit(vec![base.clone()], "work", Vec::new());
        s.conflicts.insert((base.clone(), head.clone()));
        assert_eq!(s.simulate_merge(&base, &head, "m", Vec::new()), Ok(MergeResult::Conflict));
        assert_eq!(s.simulate_merge(&head, &base, "m", Vec::new()), Ok(MergeResult::Conflict));
    }

    #[test]
    fn conflicts_propagate_to_descendants_only_when_enabled() {
        let (mut s, repo) = state_with_repo();
        let base = s.branch_head(&repo, "master").unwrap();
        let head = s.new_commit(vec![base.clone()], "work", Vec::new());
        let other = s.new_commit(vec![base.clone()], "other", Vec::new());
        s.conflicts.insert((other.clone(), head.clone()));
        let later = s.new_commit(vec![head.clone()], "more work", Vec::new());
        assert!(!s.conflicting(&other, &later));
        s.propagate_conflicts = true;
        assert!(s.conflicting(&other, &later));
    }

    #[test]
    fn self_merge_is_allowed() {
        let (mut s, repo) = state_with_repo();
        let base = s.branch_head(&repo, "master").unwrap();
        assert!(matches!(s.simulate_merge(&base, &base, "m", Vec::new()), Ok(MergeResult::Merged(_))));
    }

    #[test]
    fn unknown_sha_is_an_error() {
        let (mut s, repo) = state_with_repo();
        let base = s.branch_head(&repo, "master").unwrap();
        let ghost = Sha::parse(&"f".repeat(40)).unwrap();
        assert_eq!(
            s.simulate_merge(&base, &ghost, "m", Vec::new()),
            Err(SimError::UnknownSha(ghost))
        );
    }

    #[test]
    fn actions_apply_once_per_key() {
        let (mut s, repo) = state_with_repo();
        s.apply_op(&ScriptOp::OpenPr {
            repo: repo.clone(),
            number: None,
            title: "t".into(),
            body: String::new(),
            author: "a".into(),
            base: "master".into(),
            draft: false,
            labels: Vec::new(),
            milestone: None,
            assignees: Vec::new(),
        })
        .unwrap();
        let action = Action::new(
            "w/d/0",
            ActionKind::PostComment {
                pr: PrRef::new(repo.clone(), 1),
                body: "hi".into(),
            },
        );
        s.apply_action(&action).unwrap();
        s.apply_action(&action).unwrap();
        assert_eq!(s.repos[&repo].comments.len(), 1);
    }

    #[test]
    fn fresh_state_has_empty_log() {
        let s = SimState::new("bot", Utc::now());
        assert!(s.log.is_empty());
    }
}
