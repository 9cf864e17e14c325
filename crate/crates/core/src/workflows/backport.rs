//! Milestone-driven backport tracking on per-release-branch project boards.
//!
//! A milestone requests backports through lines of its description:
//!
//! ```text
//! backport: v8.13
//! backport: v8.12; on-reject: 8.14+rc1
//! ```

use std::collections::BTreeSet;
use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use crate::action::ActionKind;
use crate::components::{actions, state, triggers};
use crate::config::BotConfig;
use crate::engine::{Condition, GuardError, GuardResult, Plan, Workflow};
use crate::gateway::ForgeGateway;
use crate::model::{parse_merge_subject, BoardCard, ColumnLocator, Event, EventPayload, PrRef, PullRequest};

pub const REQUEST_COLUMN: &str = "Backport requested";
pub const SHIPPED_COLUMN: &str = "Shipped";

pub fn board_name(target_branch: &str) -> String {
    format!("Backports: {target_branch}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackportDirective {
    pub target_branch: String,
    pub board: String,
    pub request_column: String,
    pub shipped_column: String,
    pub rejection_milestone: Option<String>,
}

impl BackportDirective {
    pub fn new(target_branch: &str, rejection_milestone: Option<String>) -> Self {
        Self {
            target_branch: target_branch.to_string(),
            board: board_name(target_branch),
            request_column: REQUEST_COLUMN.to_string(),
            shipped_column: SHIPPED_COLUMN.to_string(),
            rejection_milestone,
        }
    }
}

/// One directive per `backport: <branch>[; on-reject: <milestone title>]` line, in order.
/// Malformed lines are ignored.
pub fn parse_backport_directives(milestone_description: &str) -> Vec<BackportDirective> {
    milestone_description
        .lines()
        .filter_map(|line| {
            let rest = line.trim().strip_prefix("backport:")?;
            let (branch, reject) = match rest.split_once(';') {
                Some((branch, suffix)) => {
                    let title = suffix.trim().strip_prefix("on-reject:")?.trim();
                    if title.is_empty() {
                        return None;
                    }
                    (branch, Some(title.to_string()))
                }
                None => (rest, None),
            };
            let branch = branch.trim();
            if branch.is_empty() || branch.contains(char::is_whitespace) {
                return None;
            }
            Some(BackportDirective::new(branch, reject))
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackportSettings {
    /// Release branches whose boards the bot maintains.
    #[serde(default)]
    pub release_branches: Vec<String>,
    /// Milestone given to a PR whose backport is rejected when its directive names none.
    #[serde(default)]
    pub default_rejection_milestone: Option<String>,
}

/// Cards to create for a merged PR, computed from its milestone and the current boards.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BackportRequests {
    pub missing: Vec<BackportDirective>,
}

/// Directives of the PR's milestone whose board has no card for the PR yet.
pub async fn gather_requests(pr: &PullRequest, gateway: &dyn ForgeGateway) -> GuardResult<BackportRequests> {
    let Some(milestone) = &pr.milestone else {
        return Ok(BackportRequests::default());
    };
    let milestone = gateway.get_milestone(&pr.repo, milestone.id).await?;
    let mut missing = Vec::new();
    for directive in parse_backport_directives(&milestone.description) {
        let cards = gateway.list_board_cards(&pr.repo, &directive.board).await?.unwrap_or_default();
        if !cards.iter().any(|c| c.pr.number == pr.number) {
            missing.push(directive);
        }
    }
    Ok(BackportRequests { missing })
}

pub fn push_requests(plan: &mut Plan, pr: &PrRef, requests: &BackportRequests, when: Condition) {
    for directive in &requests.missing {
        plan.push_when(
            ActionKind::CreateCard {
                pr: pr.clone(),
                board: directive.board.clone(),
                column: directive.request_column.clone(),
            },
            when,
        );
    }
}

/// Adds merged PRs to the request column of each board their milestone names.
pub struct BackportRequest {
    config: Arc<BotConfig>,
}

impl BackportRequest {
    pub fn new(config: Arc<BotConfig>) -> Self {
        Self { config }
    }
}

#[async_trait]
impl Workflow for BackportRequest {
    type Facts = BackportRequests;

    fn name(&self) -> &str {
        "backport-request"
    }

    fn accepts(&self, event: &Event) -> bool {
        triggers::pr_closed(event).is_some_and(|(repo, _, merged)| merged && self.config.repo(repo).is_some())
    }

    async fn gather(&self, event: &Event, gateway: &dyn ForgeGateway) -> GuardResult<BackportRequests> {
        let (repo, number, _) = triggers::pr_closed(event).expect("accepted");
        let pr = state::pull_request(gateway, &PrRef::new(repo.clone(), number)).await?;
        gather_requests(&pr, gateway).await
    }

    fn plan(&self, event: &Event, requests: &BackportRequests) -> Plan {
        let (repo, number, _) = triggers::pr_closed(event).expect("accepted");
        let mut plan = Plan::new();
        push_requests(&mut plan, &PrRef::new(repo.clone(), number), requests, Condition::Always);
        plan
    }
}

/// Moves requested PRs to the shipped column once a commit carrying their merge subject
/// lands on the release branch.
pub struct BackportShipped {
    config: Arc<BotConfig>,
}

impl BackportShipped {
    pub fn new(config: Arc<BotConfig>) -> Self {
        Self { config }
    }
}

/// Plan for a push to a release branch, given the cards currently on its board.
pub fn on_push_to_release_branch(
    branch: &str,
    commit_messages: &[&str],
    cards: &[BoardCard],
    pr_repo: &crate::model::RepoRef,
) -> Plan {
    let directive = BackportDirective::new(branch, None);
    let mut plan = Plan::new();
    let mut moved = BTreeSet::new();
    for message in commit_messages {
        let Some(number) = parse_merge_subject(message.lines().next().unwrap_or("")) else {
            continue;
        };
        let requested = cards
            .iter()
            .any(|c| c.pr.number == number && c.column == directive.request_column);
        if requested && moved.insert(number) {
            plan.push(ActionKind::MoveCard {
                pr: PrRef::new(pr_repo.clone(), number),
                board: directive.board.clone(),
                column: directive.shipped_column.clone(),
            });
        }
    }
    plan
}

#[async_trait]
impl Workflow for BackportShipped {
    type Facts = Vec<BoardCard>;

    fn name(&self) -> &str {
        "backport-shipped"
    }

    fn accepts(&self, event: &Event) -> bool {
        triggers::push(event).is_some_and(|(repo, branch, _)| {
            self.config
                .repo(repo)
                .is_some_and(|rc| rc.backport.release_branches.iter().any(|b| b == branch))
        })
    }

    async fn gather(&self, event: &Event, gateway: &dyn ForgeGateway) -> GuardResult<Vec<BoardCard>> {
        let (repo, branch, _) = triggers::push(event).expect("accepted");
        Ok(gateway.list_board_cards(repo, &board_name(branch)).await?.unwrap_or_default())
    }

    fn plan(&self, event: &Event, cards: &Vec<BoardCard>) -> Plan {
        let (repo, branch, commits) = triggers::push(event).expect("accepted");
        let messages: Vec<&str> = commits.iter().map(|c| c.message.as_str()).collect();
        on_push_to_release_branch(branch, &messages, cards, repo)
    }
}

/// Handles a release manager removing a PR from a board's request column: the PR gets the
/// rejection milestone and a comment.
pub struct BackportRejection {
    config: Arc<BotConfig>,
}

impl BackportRejection {
    pub fn new(config: Arc<BotConfig>) -> Self {
        Self { config }
    }
}

pub struct RejectionFacts {
    pr: PrRef,
    branch: String,
    new_milestone: Option<String>,
}

/// Plan for a user-removed request card.
pub fn on_card_removed(pr: &PrRef, branch: &str, new_milestone: Option<&str>) -> Plan {
    let mut plan = Plan::new();
    let mut body = format!("The backport of this PR to {branch} was rejected by the release manager.");
    if let Some(title) = new_milestone {
        plan.push(ActionKind::SetMilestone {
            pr: pr.clone(),
            title: title.to_string(),
        });
        body.push_str(&format!(" The milestone was changed to {title}."));
    }
    plan.push(actions::comment(pr, body));
    plan
}

#[async_trait]
impl Workflow for BackportRejection {
    type Facts = RejectionFacts;

    fn name(&self) -> &str {
        "backport-rejection"
    }

    fn accepts(&self, event: &Event) -> bool {
        match &event.payload {
            EventPayload::CardRemoved { repo, actor, .. } => {
                *actor != self.config.bot_name && self.config.repo(repo).is_some()
            }
            _ => false,
        }
    }

    async fn gather(&self, event: &Event, gateway: &dyn ForgeGateway) -> GuardResult<RejectionFacts> {
        let EventPayload::CardRemoved {
            repo, location, number, ..
        } = &event.payload
        else {
            unreachable!("accepted");
        };
        let rc = self.config.repo(repo).expect("accepted");
        let (board, column) = match location {
            ColumnLocator::Named { board, column } => (board.clone(), column.clone()),
            ColumnLocator::Id { column_id } => gateway
                .resolve_column(repo, *column_id)
                .await?
                .ok_or_else(|| GuardError::Refused(format!("unknown column {column_id}")))?,
        };
        let branch = rc
            .backport
            .release_branches
            .iter()
            .find(|b| board_name(b) == board)
            .ok_or_else(|| GuardError::Refused(format!("{board:?} is not a backport board")))?;
        if column != REQUEST_COLUMN {
            return Err(GuardError::Refused(format!("card left {column:?}, not the request column")));
        }
        let pr_ref = PrRef::new(repo.clone(), *number);
        let pr = state::pull_request(gateway, &pr_ref).await?;
        let directive_milestone = match &pr.milestone {
            Some(m) => {
                let milestone = gateway.get_milestone(repo, m.id).await?;
                parse_backport_directives(&milestone.description)
                    .into_iter()
                    .find(|d| &d.target_branch == branch)
                    .and_then(|d| d.rejection_milestone)
            }
            None => None,
        };
        Ok(RejectionFacts {
            pr: pr_ref,
            branch: branch.clone(),
            new_milestone: directive_milestone.or_else(|| rc.backport.default_rejection_milestone.clone()),
        })
    }

    fn plan(&self, _event: &Event, facts: &RejectionFacts) -> Plan {
        on_card_removed(&facts.pr, &facts.branch, facts.new_milestone.as_deref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RepoRef;

    #[test]
    fn single_directive() {
        let d = parse_backport_directives("backport: v8.13");
        assert_eq!(d, vec![BackportDirective::new("v8.13", None)]);
        assert_eq!(d[0].board, "Backports: v8.13");
        assert_eq!(d[0].request_column, "Backport requested");
        assert_eq!(d[0].shipped_column, "Shipped");
    }

    #[test]
    fn empty_description() {
        assert!(parse_backport_directives("").is_empty());
    }

    #[test]
    fn order_preserved_and_junk_ignored() {
        let text = "Release 8.14\nbackport: v8.13\nbackport:\nbackport: two words\nbackport: v8.12; on-reject: 8.14+rc1\nbackport: v8.11; whatever";
        let d = parse_backport_directives(text);
        assert_eq!(
            d,
            vec![
                BackportDirective::new("v8.13", None),
                BackportDirective::new("v8.12", Some("8.14+rc1".into())),
            ]
        );
    }

    fn card(n: u64, column: &str) -> BoardCard {
        BoardCard {
            board: board_name("v8.13"),
            column: column.into(),
            pr: PrRef::new("coq/coq".parse().unwrap(), n),
        }
    }

    #[test]
    fn push_moves_requested_cards_only() {
        let repo: RepoRef = "coq/coq".parse().unwrap();
        let cards = vec![card(510, REQUEST_COLUMN), card(600, SHIPPED_COLUMN)];
        let plan = on_push_to_release_branch(
            "v8.13",
            &["Merge PR #510: Fix anomaly", "Merge PR #600: Old", "Merge PR #999: No card", "Fix typo"],
            &cards,
            &repo,
        );
        assert_eq!(plan.len(), 1);
        assert!(matches!(&plan.steps()[0].kind, ActionKind::MoveCard { pr, column, .. } if pr.number == 510 && column == SHIPPED_COLUMN));
    }

    #[test]
    fn rejection_without_milestone_is_comment_only() {
        let pr = PrRef::new("coq/coq".parse().unwrap(), 510);
        let plan = on_card_removed(&pr, "v8.13", None);
        assert_eq!(plan.len(), 1);
        assert!(matches!(plan.steps()[0].kind, ActionKind::PostComment { .. }));
        let plan = on_card_removed(&pr, "v8.13", Some("8.14+rc1"));
        assert_eq!(plan.len(), 2);
        assert!(matches!(&plan.steps()[0].kind, ActionKind::SetMilestone { title, .. } if title == "8.14+rc1"));
    }
}
