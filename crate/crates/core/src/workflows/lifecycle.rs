//! Comment commands, policy-checked merging and the stale warn-then-close policy.

use std::sync::Arc;

use async_trait::async_trait;
use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::action::ActionKind;
use crate::components::{actions, state, triggers};
use crate::config::BotConfig;
use crate::engine::{Condition, GuardError, GuardResult, Plan, Workflow};
use crate::gateway::ForgeGateway;
use crate::model::{
    render_merge_message, ChecksRollup, Comment, Event, Mergeable, PrRef, PrState, PullRequest, RepoRef,
    ReviewDecision,
    REQUEST_LABEL_PREFIX,
};
use crate::workflows::backport::{self, BackportRequests};
use crate::workflows::ci::{self, REBASE_LABEL};

// ---------------------------------------------------------------------------------------------
// Commands

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", content = "targets")]
pub enum CommandKind {
    MergeNow,
    /// Job names to minimize; empty means every eligible failing job.
    CiMinimize(Vec<String>),
    Help,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Command {
    pub kind: CommandKind,
    pub issuer: String,
    pub source_comment: Comment,
}

/// Extracts bot commands, one per line of the form `^\s*@<bot_name>:\s+<words>$`.
///
/// Keywords are case-insensitive, job-name arguments are kept verbatim, and unrecognized words
/// after a valid prefix yield [`CommandKind::Help`].
pub fn parse_commands(body: &str, bot_name: &str) -> Vec<CommandKind> {
    let prefix = format!("@{bot_name}:");
    body.split('\n')
        .filter_map(|line| {
            let line = line.strip_suffix('\r').unwrap_or(line);
            let rest = line.trim_start().strip_prefix(&prefix)?;
            // At least one whitespace character must separate the prefix from the words.
            if !rest.starts_with(char::is_whitespace) {
                return None;
            }
            let words: Vec<&str> = rest.split_whitespace().collect();
            if words.is_empty() {
                return None;
            }
            Some(interpret_words(&words))
        })
        .collect()
}

fn interpret_words(words: &[&str]) -> CommandKind {
    let keyword = |i: usize, expected: &str| words.get(i).is_some_and(|w| w.eq_ignore_ascii_case(expected));
    if words.len() == 2 && keyword(0, "merge") && keyword(1, "now") {
        CommandKind::MergeNow
    } else if words.len() >= 2 && keyword(0, "ci") && keyword(1, "minimize") {
        CommandKind::CiMinimize(words[2..].iter().map(|w| w.to_string()).collect())
    } else {
        CommandKind::Help
    }
}

pub fn help_text(bot_name: &str) -> String {
    format!(
        "I did not understand that command. Available commands:\n\
         - `@{bot_name}: merge now` merges the PR once every merge requirement is met\n\
         - `@{bot_name}: ci minimize [job...]` minimizes failing reverse-dependency jobs\n\
         - `@{bot_name}: help` shows this message"
    )
}

// ---------------------------------------------------------------------------------------------
// Merge policy

fn yes() -> bool {
    true
}

fn default_forbidden_prefix() -> String {
    REQUEST_LABEL_PREFIX.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergePolicy {
    /// Team whose members may request merges.
    pub merge_team: String,
    /// Empty means any base branch.
    #[serde(default)]
    pub allowed_base_branches: Vec<String>,
    #[serde(default = "default_forbidden_prefix")]
    pub forbidden_label_prefix: String,
    #[serde(default = "yes")]
    pub require_milestone: bool,
    #[serde(default = "yes")]
    pub require_approval: bool,
    #[serde(default = "yes")]
    pub forbid_changes_requested: bool,
    #[serde(default = "yes")]
    pub require_ci_success: bool,
    #[serde(default = "yes")]
    pub forbid_draft: bool,
    #[serde(default = "yes")]
    pub forbid_self_merge: bool,
    #[serde(default)]
    pub require_assignee: bool,
}

impl MergePolicy {
    pub fn new(merge_team: &str) -> Self {
        Self {
            merge_team: merge_team.to_string(),
            allowed_base_branches: Vec::new(),
            forbidden_label_prefix: default_forbidden_prefix(),
            require_milestone: true,
            require_approval: true,
            forbid_changes_requested: true,
            require_ci_success: true,
            forbid_draft: true,
            forbid_self_merge: true,
            require_assignee: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationCode {
    NotOpen,
    NotAuthorized,
    SelfMerge,
    BaseBranchNotAllowed,
    Draft,
    MissingMilestone,
    ForbiddenLabel(String),
    MissingApproval,
    ChangesRequested,
    CiNotGreen,
    MissingAssignee,
    Conflict,
    CheckUnavailable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyViolation {
    pub code: ViolationCode,
    pub human_message: String,
}

impl PolicyViolation {
    fn new(code: ViolationCode, message: impl Into<String>) -> Self {
        Self {
            code,
            human_message: message.into(),
        }
    }
}

/// Every violated clause of `policy`, authorization first, then the PR-shape clauses in a
/// fixed order. Gateway failures collapse into a single [`ViolationCode::CheckUnavailable`].
pub async fn check_merge_policy(
    pr: &PullRequest,
    issuer: &str,
    policy: &MergePolicy,
    gateway: &dyn ForgeGateway,
) -> Vec<PolicyViolation> {
    let unavailable = |e: crate::error::GatewayError| {
        vec![PolicyViolation::new(
            ViolationCode::CheckUnavailable,
            format!("The merge policy could not be checked ({e}). Please try again later."),
        )]
    };
    let authorized = match gateway.is_team_member(pr.repo.owner(), &policy.merge_team, issuer).await {
        Ok(member) => member,
        Err(e) => return unavailable(e),
    };
    let ci = if policy.require_ci_success && pr.is_open() {
        match gateway.required_checks_status(&pr.repo, &pr.head_sha).await {
            Ok(rollup) => Some(rollup),
            Err(e) => return unavailable(e),
        }
    } else {
        None
    };
    evaluate_policy(pr, issuer, policy, authorized, ci)
}

/// Pure part of [`check_merge_policy`], once the state triggers have been queried.
pub fn evaluate_policy(
    pr: &PullRequest,
    issuer: &str,
    policy: &MergePolicy,
    authorized: bool,
    ci: Option<ChecksRollup>,
) -> Vec<PolicyViolation> {
    use ViolationCode as V;
    let mut out = Vec::new();
    if !pr.is_open() {
        let state = if pr.state == PrState::Merged { "already merged" } else { "closed" };
        out.push(PolicyViolation::new(
            V::NotOpen,
            format!("This PR is {state}. Only open PRs can be merged."),
        ));
        return out;
    }
    if !authorized {
        out.push(PolicyViolation::new(
            V::NotAuthorized,
            format!(
                "@{issuer} is not a member of the {} team. Ask a maintainer from that team to merge.",
                policy.merge_team
            ),
        ));
    }
    if policy.forbid_self_merge && issuer == pr.author {
        out.push(PolicyViolation::new(
            V::SelfMerge,
            "You are the author of this PR. Ask another maintainer to merge it.",
        ));
    }
    if !policy.allowed_base_branches.is_empty() && !policy.allowed_base_branches.contains(&pr.base_branch) {
        out.push(PolicyViolation::new(
            V::BaseBranchNotAllowed,
            format!(
                "The target branch {} does not accept merges from the bot. Retarget the PR to one of: {}.",
                pr.base_branch,
                policy.allowed_base_branches.join(", ")
            ),
        ));
    }
    if policy.forbid_draft && pr.draft {
        out.push(PolicyViolation::new(V::Draft, "This PR is a draft. Mark it as ready for review first."));
    }
    if policy.require_milestone && pr.milestone.is_none() {
        out.push(PolicyViolation::new(
            V::MissingMilestone,
            "No milestone is set. Please set a milestone before merging.",
        ));
    }
    let prefix = &policy.forbidden_label_prefix;
    if !prefix.is_empty() {
        for label in pr.labels.iter().filter(|l| l.starts_with(prefix.as_str())) {
            out.push(PolicyViolation::new(
                V::ForbiddenLabel(label.clone()),
                format!("The label \"{label}\" is set. Address it and remove the label first."),
            ));
        }
    }
    if policy.require_approval && pr.approvers().next().is_none() {
        out.push(PolicyViolation::new(
            V::MissingApproval,
            "This PR has no approving review. Get an approval first.",
        ));
    }
    if policy.forbid_changes_requested {
        let blockers: Vec<&str> = pr
            .reviews
            .iter()
            .filter(|(_, d)| **d == ReviewDecision::ChangesRequested)
            .map(|(l, _)| l.as_str())
            .collect();
        if !blockers.is_empty() {
            out.push(PolicyViolation::new(
                V::ChangesRequested,
                format!(
                    "Changes were requested by {}. Address the review or have it dismissed.",
                    blockers.join(", ")
                ),
            ));
        }
    }
    if policy.require_ci_success && ci != Some(ChecksRollup::Success) {
        let state = match ci {
            Some(ChecksRollup::Pending) => "still pending",
            Some(ChecksRollup::Failure) => "failing",
            _ => "not successful",
        };
        out.push(PolicyViolation::new(
            V::CiNotGreen,
            format!("CI is {state}. Wait for the required checks to succeed."),
        ));
    }
    if policy.require_assignee && pr.assignees.is_empty() {
        out.push(PolicyViolation::new(
            V::MissingAssignee,
            "Nobody is assigned to this PR. Assign the shepherding maintainer.",
        ));
    }
    if pr.mergeable == Mergeable::Conflicting {
        out.push(conflict_violation());
    }
    out
}

fn conflict_violation() -> PolicyViolation {
    PolicyViolation::new(
        ViolationCode::Conflict,
        "This PR has merge conflicts with its base branch. Rebase it first.",
    )
}

pub fn render_violations(issuer: &str, violations: &[PolicyViolation]) -> String {
    let mut body = format!("@{issuer}: I cannot merge this PR because:");
    for v in violations {
        body.push_str("\n- ");
        body.push_str(&v.human_message);
    }
    body
}

/// Facts gathered before acting on a merge command.
#[derive(Debug, Clone)]
pub struct MergeFacts {
    pub pr: PullRequest,
    pub violations: Vec<PolicyViolation>,
    pub backport: BackportRequests,
}

pub async fn gather_merge_facts(
    pr: PullRequest,
    issuer: &str,
    policy: &MergePolicy,
    gateway: &dyn ForgeGateway,
) -> GuardResult<MergeFacts> {
    let violations = check_merge_policy(&pr, issuer, policy, gateway).await;
    let backport = if violations.is_empty() {
        backport::gather_requests(&pr, gateway).await?
    } else {
        BackportRequests::default()
    };
    Ok(MergeFacts { pr, violations, backport })
}

/// Merges when nothing is violated, otherwise posts one comment listing every violation.
/// Exactly one of the two happens.
pub fn handle_merge_command(facts: &MergeFacts, issuer: &str) -> Plan {
    let pr_ref = facts.pr.pr_ref();
    let mut plan = Plan::new();
    if !facts.violations.is_empty() {
        plan.push(actions::comment(&pr_ref, render_violations(issuer, &facts.violations)));
        return plan;
    }
    let merge = plan.push(ActionKind::MergePr {
        pr: pr_ref.clone(),
        message: render_merge_message(&facts.pr),
    });
    plan.push_when(
        actions::comment(&pr_ref, render_violations(issuer, &[conflict_violation()])),
        Condition::Conflicted(merge),
    );
    plan.push_when(
        actions::comment(&pr_ref, format!("@{issuer}: the merge failed on the forge side. Please try again.")),
        Condition::Failed(merge),
    );
    backport::push_requests(&mut plan, &pr_ref, &facts.backport, Condition::Succeeded(merge));
    plan
}

#[doc(hidden)]
pub enum CommandFacts {
    Merge(MergeFacts),
    Minimize {
        pr: PullRequest,
        requested: Vec<String>,
        eligible: Vec<String>,
    },
    Help(PrRef),
}

/// Reacts to `@<bot>:` commands in PR comments.
pub struct CommentCommands {
    config: Arc<BotConfig>,
}

impl CommentCommands {
    pub fn new(config: Arc<BotConfig>) -> Self {
        Self { config }
    }

    fn commands<'a>(&self, event: &'a Event) -> Option<(&'a Comment, Vec<CommandKind>)> {
        let comment = triggers::new_comment(event)?;
        if comment.author == self.config.bot_name || self.config.repo(&comment.target.repo).is_none() {
            return None;
        }
        let commands = parse_commands(&comment.body, &self.config.bot_name);
        (!commands.is_empty()).then_some((comment, commands))
    }
}

#[async_trait]
impl Workflow for CommentCommands {
    type Facts = Vec<CommandFacts>;

    fn name(&self) -> &str {
        "pr-commands"
    }

    fn accepts(&self, event: &Event) -> bool {
        self.commands(event).is_some()
    }

    async fn gather(&self, event: &Event, gateway: &dyn ForgeGateway) -> GuardResult<Vec<CommandFacts>> {
        let (comment, commands) = self.commands(event).expect("accepted");
        let rc = self.config.repo(&comment.target.repo).expect("accepted");
        let pr = state::pull_request(gateway, &comment.target).await?;
        let mut facts = Vec::new();
        for command in commands {
            facts.push(match command {
                CommandKind::MergeNow => CommandFacts::Merge(
                    gather_merge_facts(pr.clone(), &comment.author, &rc.merge_policy, gateway).await?,
                ),
                CommandKind::CiMinimize(requested) => {
                    if !pr.is_open() {
                        return Err(GuardError::Refused(format!("{} is not open", pr.pr_ref())));
                    }
                    let eligible = ci::eligible_minimization_jobs(
                        gateway,
                        &rc.ci,
                        &rc.mirror.ci_repo,
                        &rc.mirror.branch_for(pr.number),
                        &pr.base_branch,
                    )
                    .await?;
                    CommandFacts::Minimize {
                        pr: pr.clone(),
                        requested,
                        eligible,
                    }
                }
                CommandKind::Help => CommandFacts::Help(pr.pr_ref()),
            });
        }
        Ok(facts)
    }

    fn plan(&self, event: &Event, facts: &Vec<CommandFacts>) -> Plan {
        let (comment, _) = self.commands(event).expect("accepted");
        let rc = self.config.repo(&comment.target.repo).expect("accepted");
        let mut plan = Plan::new();
        for fact in facts {
            match fact {
                CommandFacts::Merge(m) => plan.extend(handle_merge_command(m, &comment.author)),
                CommandFacts::Minimize { pr, requested, eligible } => {
                    plan.extend(ci::trigger_minimization(pr, requested, eligible, rc))
                }
                CommandFacts::Help(pr) => {
                    plan.push(actions::comment(pr, help_text(&self.config.bot_name)));
                }
            }
        }
        plan
    }
}

// ---------------------------------------------------------------------------------------------
// Stale PRs

pub const STALE_WARNING_MARKER: &str = "<!-- bot:stale-warning -->";

fn default_trigger_label() -> String {
    REBASE_LABEL.to_string()
}

fn thirty() -> u32 {
    30
}

fn default_marker() -> String {
    STALE_WARNING_MARKER.to_string()
}

/// Stale policy as written in the config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaleSettings {
    #[serde(default = "default_trigger_label")]
    pub trigger_label: String,
    #[serde(default = "thirty")]
    pub warn_after_days: u32,
    #[serde(default = "thirty")]
    pub close_after_warning_days: u32,
    #[serde(default = "default_marker")]
    pub warning_marker: String,
}

impl Default for StaleSettings {
    fn default() -> Self {
        Self {
            trigger_label: default_trigger_label(),
            warn_after_days: thirty(),
            close_after_warning_days: thirty(),
            warning_marker: default_marker(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StalePolicy {
    pub trigger_label: String,
    pub warn_after: Duration,
    pub close_after_warning: Duration,
    pub warning_marker: String,
}

impl From<&StaleSettings> for StalePolicy {
    fn from(s: &StaleSettings) -> Self {
        Self {
            trigger_label: s.trigger_label.clone(),
            warn_after: Duration::days(i64::from(s.warn_after_days)),
            close_after_warning: Duration::days(i64::from(s.close_after_warning_days)),
            warning_marker: s.warning_marker.clone(),
        }
    }
}

impl Default for StalePolicy {
    fn default() -> Self {
        StalePolicy::from(&StaleSettings::default())
    }
}

fn days(d: Duration) -> i64 {
    d.num_days()
}

pub fn stale_warning_body(policy: &StalePolicy) -> String {
    format!(
        "{}\nThis PR has had the \"{}\" label for more than {} days. It will be closed in {} days unless the merge conflicts are resolved.",
        policy.warning_marker,
        policy.trigger_label,
        days(policy.warn_after),
        days(policy.close_after_warning)
    )
}

pub fn stale_closing_body(policy: &StalePolicy) -> String {
    format!(
        "Closing this PR: it still had the \"{}\" label {} days after the warning. Feel free to reopen it once the conflicts are resolved.",
        policy.trigger_label,
        days(policy.close_after_warning)
    )
}

/// What the stale policy says about one labeled PR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StaleDecision {
    Nothing,
    Warn,
    Close,
}

/// `labeled_at` is the latest application of the label; warnings older than that are void.
pub fn stale_decision(
    now: DateTime<Utc>,
    labeled_at: DateTime<Utc>,
    warnings: &[DateTime<Utc>],
    policy: &StalePolicy,
) -> StaleDecision {
    match warnings.iter().filter(|w| **w >= labeled_at).max() {
        None if now - labeled_at >= policy.warn_after => StaleDecision::Warn,
        Some(w) if now - *w >= policy.close_after_warning => StaleDecision::Close,
        _ => StaleDecision::Nothing,
    }
}

/// Actions the stale policy calls for across the repository at `now`. PRs whose queries fail
/// are skipped.
pub async fn stale_scan(
    repo: &RepoRef,
    now: DateTime<Utc>,
    policy: &StalePolicy,
    gateway: &dyn ForgeGateway,
) -> GuardResult<Vec<ActionKind>> {
    let prs = gateway.list_open_prs_with_label(repo, &policy.trigger_label).await?;
    let mut planned = Vec::new();
    for pr in prs {
        let pr_ref = pr.pr_ref();
        let labeled_at = match gateway.label_applied_since(&pr_ref, &policy.trigger_label).await {
            Ok(Some(t)) => t,
            Ok(None) => continue,
            Err(error) => {
                warn!(pr = %pr_ref, %error, "skipping PR in stale scan");
                continue;
            }
        };
        let warnings = match gateway.bot_comments(&pr_ref, &policy.warning_marker).await {
            Ok(comments) => comments.into_iter().map(|c| c.created_at).collect::<Vec<_>>(),
            Err(error) => {
                warn!(pr = %pr_ref, %error, "skipping PR in stale scan");
                continue;
            }
        };
        match stale_decision(now, labeled_at, &warnings, policy) {
            StaleDecision::Nothing => {}
            StaleDecision::Warn => planned.push(actions::comment(&pr_ref, stale_warning_body(policy))),
            StaleDecision::Close => {
                planned.push(actions::comment(&pr_ref, stale_closing_body(policy)));
                planned.push(actions::close(&pr_ref));
            }
        }
    }
    Ok(planned)
}

/// Runs the stale scan on every scheduled tick.
pub struct StaleScan {
    config: Arc<BotConfig>,
}

impl StaleScan {
    pub fn new(config: Arc<BotConfig>) -> Self {
        Self { config }
    }
}

#[async_trait]
impl Workflow for StaleScan {
    type Facts = Vec<ActionKind>;

    fn name(&self) -> &str {
        "stale-scan"
    }

    fn accepts(&self, event: &Event) -> bool {
        triggers::scheduled_tick(event).is_some_and(|(repo, _)| self.config.repo(repo).is_some())
    }

    async fn gather(&self, event: &Event, gateway: &dyn ForgeGateway) -> GuardResult<Vec<ActionKind>> {
        let (repo, at) = triggers::scheduled_tick(event).expect("accepted");
        let policy = StalePolicy::from(&self.config.repo(repo).expect("accepted").stale);
        stale_scan(repo, at, &policy, gateway).await
    }

    fn plan(&self, _event: &Event, planned: &Vec<ActionKind>) -> Plan {
        let mut plan = Plan::new();
        for action in planned {
            plan.push(action.clone());
        }
        plan
    }
}
