//! A deterministic in-memory forge and CI implementing [`ForgeGateway`], with a controllable
//! clock, webhook emission and a replayable mutation log.

mod runner;
mod script;
mod state;

use std::sync::{Mutex, MutexGuard};

use async_trait::async_trait;
use chrono::{DateTime, Utc};

use forgebot_core::action::{Action, ActionKind, ActionOutcome};
use forgebot_core::gateway::{ForgeGateway, GatewayResult};
use forgebot_core::model::{
    BoardCard, CheckReport, ChecksRollup, CiJob, Comment, Commit, Event, LogRef, MilestoneRef, PrRef, PullRequest,
    RepoRef, Sha,
};
use forgebot_core::GatewayError;

pub use runner::{default_epoch, replay_script, Redelivery, Runner, RunnerError};
pub use script::{parse_script, parse_script_lines, render_script, JobSpec, ScriptError, ScriptOp};
pub use state::{
    Column, LabelEvent, LogEntry, MergeResult, Mutation, Pipeline, SimError, SimRepo, SimState, SIGNATURE_ANNOTATION,
};

/// Thread-safe handle on a [`SimState`]. Every call runs under one lock.
pub struct SimForge {
    state: Mutex<SimState>,
}

impl SimForge {
    pub fn new(bot_name: &str, epoch: DateTime<Utc>) -> Self {
        Self::from_state(SimState::new(bot_name, epoch))
    }

    pub fn from_state(state: SimState) -> Self {
        Self {
            state: Mutex::new(state),
        }
    }

    pub fn lock(&self) -> MutexGuard<'_, SimState> {
        self.state.lock().expect("simulator state poisoned")
    }

    pub fn state(&self) -> SimState {
        self.lock().clone()
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.lock().clock
    }

    pub fn register_mirror(&self, ci_repo: RepoRef, origin: RepoRef, branch_prefix: &str) {
        self.lock()
            .mirrors
            .insert(ci_repo, (origin, branch_prefix.to_string()));
    }

    pub fn set_conflict_propagation(&self, on: bool) {
        self.lock().propagate_conflicts = on;
    }

    pub fn apply_op(&self, op: &ScriptOp) -> Result<Vec<Event>, SimError> {
        let mut state = self.lock();
        let result = state.apply_op(op);
        let events = state.take_events();
        result.map(|()| events)
    }

    pub fn simulate_merge(&self, base_head: &Sha, pr_head: &Sha, message: &str) -> Result<MergeResult, SimError> {
        self.lock().simulate_merge(base_head, pr_head, message, Vec::new())
    }

    pub fn set_clock(&self, to: DateTime<Utc>) {
        self.lock().set_clock(to);
    }

    /// Webhooks caused by bot actions since the last call.
    pub fn take_events(&self) -> Vec<Event> {
        self.lock().take_events()
    }

    pub fn action_log(&self) -> Vec<LogEntry> {
        self.lock().log.clone()
    }

    /// Actions the bot performed, in order.
    pub fn bot_actions(&self) -> Vec<(Action, ActionOutcome)> {
        self.lock()
            .log
            .iter()
            .filter_map(|e| match &e.mutation {
                Mutation::Bot { action, outcome } => Some((action.clone(), outcome.clone())),
                _ => None,
            })
            .collect()
    }

    /// Rebuilds a state by applying `log` to a fresh simulator with the same settings.
    pub fn replay(&self) -> Result<SimState, SimError> {
        let current = self.state();
        let mut fresh = SimState::new(&current.bot_name, current.epoch);
        fresh.mirrors = current.mirrors.clone();
        fresh.propagate_conflicts = current.propagate_conflicts;
        replay_log(&mut fresh, &current.log)?;
        Ok(fresh)
    }
}

pub fn replay_log(state: &mut SimState, log: &[LogEntry]) -> Result<(), SimError> {
    for entry in log {
        match &entry.mutation {
            Mutation::Clock { to } => state.set_clock(*to),
            Mutation::User { op } => state.apply_op(op)?,
            Mutation::Bot { action, .. } => {
                state
                    .apply_action(action)
                    .map_err(|e| SimError::Invalid(format!("replaying {}: {e}", action.kind.name())))?;
            }
        }
        state.take_events();
    }
    Ok(())
}

/// One line per action, as printed by the replay tool.
pub fn format_action_log(entries: &[LogEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        if let Mutation::Bot { action, outcome } = &e.mutation {
            let outcome = match outcome {
                ActionOutcome::Applied => "applied".to_string(),
                ActionOutcome::NoChange => "no change".to_string(),
                ActionOutcome::Merged { sha } => format!("merged {}", sha.short()),
                ActionOutcome::Pushed { sha } => format!("pushed {}", sha.short()),
                ActionOutcome::Conflict => "conflict".to_string(),
            };
            out.push_str(&format!("{} {} {} [{}]\n", e.at.to_rfc3339(), e.actor, action.kind, outcome));
        }
    }
    out
}

fn gw<T>(r: Result<T, SimError>) -> GatewayResult<T> {
    r.map_err(GatewayError::from)
}

#[async_trait]
impl ForgeGateway for SimForge {
    async fn get_pull_request(&self, pr: &PrRef) -> GatewayResult<PullRequest> {
        gw(self.lock().pr_view(pr))
    }

    async fn is_team_member(&self, org: &str, team: &str, login: &str) -> GatewayResult<bool> {
        let state = self.lock();
        let members = state
            .teams
            .get(org)
            .and_then(|t| t.get(team))
            .ok_or_else(|| GatewayError::UnknownTeam(format!("{org}/{team}")))?;
        Ok(members.contains(login))
    }

    async fn list_open_prs_with_label(&self, repo: &RepoRef, label: &str) -> GatewayResult<Vec<PullRequest>> {
        let state = self.lock();
        let r = gw(state.repo(repo))?;
        r.prs
            .values()
            .filter(|p| p.is_open() && p.has_label(label))
            .map(|p| gw(state.pr_view(&p.pr_ref())))
            .collect()
    }

    async fn label_applied_since(&self, pr: &PrRef, label: &str) -> GatewayResult<Option<DateTime<Utc>>> {
        let state = self.lock();
        gw(state.pr(pr))?;
        Ok(gw(state.repo(&pr.repo))?
            .label_events
            .iter()
            .filter(|e| e.number == pr.number && e.label == label && e.added)
            .map(|e| e.at)
            .max())
    }

    async fn bot_comments(&self, pr: &PrRef, marker: &str) -> GatewayResult<Vec<Comment>> {
        let state = self.lock();
        gw(state.pr(pr))?;
        Ok(gw(state.repo(&pr.repo))?
            .comments
            .iter()
            .filter(|c| c.target == *pr && c.author == state.bot_name && c.body.contains(marker))
            .cloned()
            .collect())
    }

    async fn get_job_log(&self, ci_repo: &RepoRef, log: &LogRef) -> GatewayResult<String> {
        let state = self.lock();
        gw(state.repo(ci_repo))?
            .logs
            .get(&log.0)
            .cloned()
            .ok_or_else(|| GatewayError::NotFound(format!("log {} in {ci_repo}", log.0)))
    }

    async fn list_board_cards(&self, repo: &RepoRef, board: &str) -> GatewayResult<Option<Vec<BoardCard>>> {
        gw(self.lock().board_cards(repo, board))
    }

    async fn resolve_column(&self, repo: &RepoRef, column_id: u64) -> GatewayResult<Option<(String, String)>> {
        let state = self.lock();
        Ok(gw(state.repo(repo))?.boards.iter().find_map(|(board, columns)| {
            columns
                .iter()
                .find(|c| c.id == column_id)
                .map(|c| (board.clone(), c.name.clone()))
        }))
    }

    async fn get_milestone(&self, repo: &RepoRef, id: u64) -> GatewayResult<MilestoneRef> {
        let state = self.lock();
        gw(state.repo(repo))?
            .milestones
            .get(&id)
            .cloned()
            .ok_or_else(|| GatewayError::NotFound(format!("milestone {id} in {repo}")))
    }

    async fn required_checks_status(&self, repo: &RepoRef, sha: &Sha) -> GatewayResult<ChecksRollup> {
        gw(self.lock().required_checks(repo, sha))
    }

    async fn get_commit(&self, _repo: &RepoRef, sha: &Sha) -> GatewayResult<Option<Commit>> {
        Ok(self.lock().commits.get(sha).cloned())
    }

    async fn check_reports(&self, repo: &RepoRef, sha: &Sha) -> GatewayResult<Vec<CheckReport>> {
        let state = self.lock();
        Ok(gw(state.repo(repo))?.checks.get(sha).cloned().unwrap_or_default())
    }

    async fn latest_pipeline_jobs(&self, ci_repo: &RepoRef, branch: &str) -> GatewayResult<Vec<CiJob>> {
        let state = self.lock();
        Ok(gw(state.repo(ci_repo))?
            .pipelines
            .values()
            .rev()
            .find(|p| p.branch == branch)
            .map(|p| p.jobs.clone())
            .unwrap_or_default())
    }

    async fn execute(&self, action: &Action) -> GatewayResult<ActionOutcome> {
        self.lock().apply_action(action)
    }
}

/// Filters a bot action list down to its kinds, for table-style assertions.
pub fn kinds(actions: &[(Action, ActionOutcome)]) -> Vec<&ActionKind> {
    actions.iter().map(|(a, _)| &a.kind).collect()
}

/// A simulator holding exactly the conformance world.
pub fn conformance_forge(w: &forgebot_core::conformance::World) -> SimForge {
    use forgebot_core::model::{
        CheckConclusion, CheckReport, Comment, Commit, JobStatus, MilestoneRef, PrState, PullRequest, StatusReport,
        StatusState,
    };
    use std::collections::{BTreeMap, BTreeSet};

    let mut state = SimState::new(&w.bot_name, w.labeled_at);
    state.next_id = 100_000;
    let commit = |sha: &Sha, parents: Vec<Sha>, message: String| Commit {
        sha: sha.clone(),
        parents,
        message,
        annotations: Vec::new(),
    };
    let mirror_message = forgebot_core::action::mirror_commit_message(w.pr, &w.head_sha, &w.base_branch, &w.base_sha);
    for c in [
        commit(&w.base_sha, Vec::new(), "Initial commit".into()),
        commit(&w.head_sha, vec![w.base_sha.clone()], w.pr_title.clone()),
        commit(&w.conflicting_head_sha, vec![w.base_sha.clone()], "Conflicting change".into()),
        commit(&w.mirror_sha, vec![w.base_sha.clone(), w.head_sha.clone()], mirror_message),
    ] {
        state.commits.insert(c.sha.clone(), c);
    }
    state.conflicts.insert((w.base_sha.clone(), w.conflicting_head_sha.clone()));
    state
        .teams
        .entry(w.org.clone())
        .or_default()
        .insert(w.team.clone(), BTreeSet::from([w.member.clone()]));
    state.mirrors.insert(w.ci_repo.clone(), (w.repo.clone(), "pr-".into()));

    let milestone = MilestoneRef {
        id: w.milestone_id,
        title: w.milestone_title.clone(),
        description: w.milestone_description.clone(),
    };
    let pr = |number: u64, title: &str, head: &Sha| PullRequest {
        repo: w.repo.clone(),
        number,
        title: title.to_string(),
        body: String::new(),
        author: w.pr_author.clone(),
        base_branch: w.base_branch.clone(),
        head_sha: head.clone(),
        head_repo: w.repo.clone(),
        draft: false,
        state: PrState::Open,
        labels: BTreeSet::new(),
        milestone: None,
        assignees: BTreeSet::new(),
        reviews: BTreeMap::new(),
        mergeable: Default::default(),
    };
    let mut main = pr(w.pr, &w.pr_title, &w.head_sha);
    main.labels.insert(w.label.clone());
    main.milestone = Some(milestone.clone());
    let other = pr(w.conflicting_pr, "Conflicting change", &w.conflicting_head_sha);

    let mut repo = SimRepo::default();
    repo.branches.insert(w.base_branch.clone(), w.base_sha.clone());
    repo.prs.insert(w.pr, main);
    repo.prs.insert(w.conflicting_pr, other);
    repo.label_events.push(LabelEvent {
        number: w.pr,
        label: w.label.clone(),
        added: true,
        at: w.labeled_at,
    });
    repo.comments.push(Comment {
        id: 1,
        author: w.bot_name.clone(),
        body: format!("This PR needs a rebase.\n\n{}", w.marker),
        created_at: w.labeled_at,
        target: w.pr_ref(w.pr),
    });
    repo.milestones.insert(w.milestone_id, milestone);
    repo.boards.insert(
        w.board.clone(),
        vec![Column {
            id: w.column_id,
            name: w.column.clone(),
            cards: vec![w.pr],
        }],
    );
    repo.statuses.insert(
        w.head_sha.clone(),
        vec![StatusReport {
            context: format!("{}/pipeline", w.bot_name),
            state: StatusState::Success,
            description: "Pipeline succeeded".into(),
            target_url: None,
            target_sha: w.head_sha.clone(),
        }],
    );
    repo.checks.insert(
        w.conflicting_head_sha.clone(),
        vec![CheckReport::new(
            w.failed_check_name.clone(),
            CheckConclusion::Failure,
            "Job failed",
            "Error: Unable to unify.",
            w.conflicting_head_sha.clone(),
        )],
    );
    state.repos.insert(w.repo.clone(), repo);

    let mut ci = SimRepo::default();
    ci.branches.insert(w.mirror_branch.clone(), w.mirror_sha.clone());
    let jobs = w
        .job_names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let failed = *name == w.failed_check_name;
            forgebot_core::model::CiJob {
                id: if failed { w.failed_job_log_ref.0.parse().expect("numeric log ref") } else { 5000 + i as u64 },
                pipeline_id: 300,
                name: name.clone(),
                status: if failed { JobStatus::Failed } else { JobStatus::Success },
                log_ref: if failed { w.failed_job_log_ref.clone() } else { LogRef((5000 + i).to_string()) },
                artifacts: Vec::new(),
                tested_sha: w.mirror_sha.clone(),
                web_url: None,
            }
        })
        .collect();
    ci.logs.insert(w.failed_job_log_ref.0.clone(), w.failed_job_log.clone());
    ci.pipelines.insert(
        300,
        Pipeline {
            id: 300,
            branch: w.mirror_branch.clone(),
            tested_sha: w.mirror_sha.clone(),
            status: JobStatus::Failed,
            jobs,
            variables: BTreeMap::new(),
        },
    );
    state.repos.insert(w.ci_repo.clone(), ci);
    SimForge::from_state(state)
}
