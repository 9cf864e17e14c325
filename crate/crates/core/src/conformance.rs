//! Capability checks every [`ForgeGateway`] implementation must pass against the same
//! seeded world. Backends seed their own storage (simulator state, recorded HTTP responses)
//! from [`World::standard`] and run [`run_suite`].

use chrono::{DateTime, TimeZone, Utc};

use crate::action::{Action, ActionKind, ActionOutcome, MirrorTarget};
use crate::error::GatewayError;
use crate::gateway::{ForgeGateway, GatewayExt, PushResult};
use crate::model::{CheckConclusion, ChecksRollup, JobStatus, LogRef, PrRef, RepoRef, Sha};

/// Facts shared by every conformance backend.
#[derive(Debug, Clone)]
pub struct World {
    pub bot_name: String,
    pub repo: RepoRef,
    pub ci_repo: RepoRef,
    pub org: String,
    pub team: String,
    pub member: String,
    pub non_member: String,
    /// Open, labeled, milestoned, green PR.
    pub pr: u64,
    pub pr_title: String,
    pub pr_author: String,
    pub base_branch: String,
    pub base_sha: Sha,
    pub head_sha: Sha,
    /// Open PR whose head conflicts with the base and carries a failed check.
    pub conflicting_pr: u64,
    pub conflicting_head_sha: Sha,
    pub missing_pr: u64,
    pub label: String,
    pub labeled_at: DateTime<Utc>,
    pub marker: String,
    pub milestone_id: u64,
    pub milestone_title: String,
    pub milestone_description: String,
    pub board: String,
    pub column: String,
    pub column_id: u64,
    pub mirror_branch: String,
    pub mirror_sha: Sha,
    pub job_names: Vec<String>,
    pub failed_job_log_ref: LogRef,
    pub failed_job_log: String,
    pub failed_check_name: String,
}

fn sha(c: char) -> Sha {
    Sha::parse(&c.to_string().repeat(40)).expect("hex digit")
}

impl World {
    pub fn standard() -> Self {
        Self {
            bot_name: "coqbot".into(),
            repo: "coq/coq".parse().expect("valid"),
            ci_repo: "coq/coq-ci".parse().expect("valid"),
            org: "coq".into(),
            team: "merge-maintainers".into(),
            member: "alice".into(),
            non_member: "mallory".into(),
            pr: 42,
            pr_title: "Fix anomaly in the unifier".into(),
            pr_author: "bob".into(),
            base_branch: "master".into(),
            base_sha: sha('b'),
            head_sha: sha('c'),
            conflicting_pr: 43,
            conflicting_head_sha: sha('d'),
            missing_pr: 4040,
            label: "needs: rebase".into(),
            labeled_at: Utc.with_ymd_and_hms(2026, 2, 1, 12, 0, 0).single().expect("valid"),
            marker: "<!-- bot:stale-warning -->".into(),
            milestone_id: 7,
            milestone_title: "8.13.1".into(),
            milestone_description: "backport: v8.13".into(),
            board: "Backports: v8.13".into(),
            column: "Backport requested".into(),
            column_id: 901,
            mirror_branch: "pr-42".into(),
            mirror_sha: sha('e'),
            job_names: vec!["build:base".into(), "test-suite:base".into()],
            failed_job_log_ref: LogRef("5001".into()),
            failed_job_log: "make world\nFile \"test.v\", line 3, characters 0-5:\nError: Unable to unify.\n".into(),
            failed_check_name: "test-suite:base".into(),
        }
    }

    pub fn pr_ref(&self, number: u64) -> PrRef {
        PrRef::new(self.repo.clone(), number)
    }

    pub fn mirror_target(&self) -> MirrorTarget {
        MirrorTarget::new(self.ci_repo.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckOutcome {
    pub capability: &'static str,
    pub passed: bool,
    pub detail: String,
}

struct Suite {
    outcomes: Vec<CheckOutcome>,
}

impl Suite {
    fn check(&mut self, capability: &'static str, passed: bool, detail: impl std::fmt::Debug) {
        self.outcomes.push(CheckOutcome {
            capability,
            passed,
            detail: if passed { String::new() } else { format!("{detail:?}") },
        });
    }
}

/// Runs every capability check; never panics.
pub async fn run_suite(gw: &dyn ForgeGateway, w: &World) -> Vec<CheckOutcome> {
    let mut s = Suite { outcomes: Vec::new() };

    let pr = gw.get_pull_request(&w.pr_ref(w.pr)).await;
    let ok = pr.as_ref().is_ok_and(|p| {
        p.number == w.pr
            && p.title == w.pr_title
            && p.author == w.pr_author
            && p.head_sha == w.head_sha
            && p.base_branch == w.base_branch
            && p.is_open()
            && p.has_label(&w.label)
            && p.milestone.as_ref().is_some_and(|m| m.id == w.milestone_id)
    });
    s.check("get_pull_request", ok, &pr);

    let missing = gw.get_pull_request(&w.pr_ref(w.missing_pr)).await;
    s.check("get_pull_request_missing", matches!(missing, Err(GatewayError::NotFound(_))), &missing);

    let member = gw.is_team_member(&w.org, &w.team, &w.member).await;
    s.check("is_team_member", matches!(member, Ok(true)), &member);
    let outsider = gw.is_team_member(&w.org, &w.team, &w.non_member).await;
    s.check("is_team_member_outsider", matches!(outsider, Ok(false)), &outsider);
    let unknown = gw.is_team_member(&w.org, "no-such-team", &w.member).await;
    s.check("is_team_member_unknown_team", matches!(unknown, Err(GatewayError::UnknownTeam(_))), &unknown);

    let labeled = gw.list_open_prs_with_label(&w.repo, &w.label).await;
    let ok = labeled
        .as_ref()
        .is_ok_and(|prs| prs.iter().map(|p| p.number).collect::<Vec<_>>() == [w.pr]);
    s.check("list_open_prs_with_label", ok, &labeled);

    let since = gw.label_applied_since(&w.pr_ref(w.pr), &w.label).await;
    s.check("label_applied_since", since.as_ref().is_ok_and(|t| *t == Some(w.labeled_at)), &since);

    let comments = gw.bot_comments(&w.pr_ref(w.pr), &w.marker).await;
    let ok = comments
        .as_ref()
        .is_ok_and(|c| c.len() == 1 && c[0].author == w.bot_name && c[0].body.contains(&w.marker));
    s.check("bot_comments", ok, &comments);

    let log = gw.get_job_log(&w.ci_repo, &w.failed_job_log_ref).await;
    s.check("get_job_log", log.as_ref().is_ok_and(|l| *l == w.failed_job_log), &log);

    let cards = gw.list_board_cards(&w.repo, &w.board).await;
    let ok = cards.as_ref().is_ok_and(|c| {
        c.as_ref()
            .is_some_and(|c| c.len() == 1 && c[0].pr.number == w.pr && c[0].column == w.column)
    });
    s.check("list_board_cards", ok, &cards);
    let no_board = gw.list_board_cards(&w.repo, "Backports: v0.0").await;
    s.check("list_board_cards_missing", matches!(no_board, Ok(None)), &no_board);

    let column = gw.resolve_column(&w.repo, w.column_id).await;
    s.check(
        "resolve_column",
        column.as_ref().is_ok_and(|c| *c == Some((w.board.clone(), w.column.clone()))),
        &column,
    );

    let milestone = gw.get_milestone(&w.repo, w.milestone_id).await;
    let ok = milestone
        .as_ref()
        .is_ok_and(|m| m.title == w.milestone_title && m.description == w.milestone_description);
    s.check("get_milestone", ok, &milestone);

    let rollup = gw.required_checks_status(&w.repo, &w.head_sha).await;
    s.check("required_checks_status", matches!(rollup, Ok(ChecksRollup::Success)), &rollup);

    let commit = gw.get_commit(&w.ci_repo, &w.mirror_sha).await;
    let ok = commit.as_ref().is_ok_and(|c| {
        c.as_ref().is_some_and(|c| {
            c.parents == [w.base_sha.clone(), w.head_sha.clone()] && crate::action::is_mirror_commit_message(&c.message)
        })
    });
    s.check("get_commit", ok, &commit);

    let checks = gw.check_reports(&w.repo, &w.conflicting_head_sha).await;
    let ok = checks.as_ref().is_ok_and(|c| {
        c.len() == 1 && c[0].name == w.failed_check_name && c[0].conclusion == CheckConclusion::Failure
    });
    s.check("check_reports", ok, &checks);

    let jobs = gw.latest_pipeline_jobs(&w.ci_repo, &w.mirror_branch).await;
    let ok = jobs.as_ref().is_ok_and(|jobs| {
        jobs.iter().map(|j| j.name.clone()).collect::<Vec<_>>() == w.job_names
            && jobs.iter().any(|j| j.status == JobStatus::Failed && j.log_ref == w.failed_job_log_ref)
    });
    s.check("latest_pipeline_jobs", ok, &jobs);

    let comment = Action::new(
        "conformance/comment/0",
        ActionKind::PostComment {
            pr: w.pr_ref(w.pr),
            body: "conformance check".into(),
        },
    );
    let first = gw.execute(&comment).await;
    let second = gw.execute(&comment).await;
    let ok = matches!(first, Ok(ActionOutcome::Applied)) && first == second;
    s.check("execute_idempotent", ok, (&first, &second));

    let conflicting = gw.get_pull_request(&w.pr_ref(w.conflicting_pr)).await;
    match conflicting {
        Ok(pr) => {
            let pushed = gw.push_merged_branch(&pr, &w.mirror_target(), "conformance/push/0").await;
            s.check("push_merged_branch_conflict", matches!(pushed, Ok(PushResult::Conflict)), &pushed);
        }
        Err(e) => s.check("push_merged_branch_conflict", false, e),
    }

    match pr {
        Ok(pr) => {
            let pushed = gw.push_merged_branch(&pr, &w.mirror_target(), "conformance/push/1").await;
            s.check("push_merged_branch", matches!(pushed, Ok(PushResult::Pushed(_))), &pushed);
            let merged = gw
                .merge_pull_request(&pr, &format!("Merge PR #{}: {}", w.pr, w.pr_title), "conformance/merge/0")
                .await;
            s.check("merge_pull_request", merged.is_ok(), &merged);
        }
        Err(e) => {
            s.check("push_merged_branch", false, &e);
            s.check("merge_pull_request", false, e);
        }
    }

    s.outcomes
}

/// Capability names of failed checks.
pub fn failures(outcomes: &[CheckOutcome]) -> Vec<String> {
    outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| format!("{}: {}", o.capability, o.detail))
        .collect()
}
