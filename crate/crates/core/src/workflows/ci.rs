//! CI lifecycle: mirror PRs to the CI forge as synthetic merge commits, report pipeline and
//! job outcomes back on the origin commit, and plumb test-case minimization requests.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use async_trait::async_trait;
use globset::Glob;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::action::ActionKind;
use crate::components::{actions, state, triggers};
use crate::config::{BotConfig, RepoConfig};
use crate::engine::{Condition, GuardError, GuardResult, Plan, Workflow};
use crate::gateway::ForgeGateway;
use crate::model::{
    truncate_head, CheckConclusion, CheckReport, CiJob, Event, JobStatus, PrRef, PullRequest, RepoRef, Sha,
    StatusReport, StatusState, MAX_SUMMARY_BYTES,
};

/// Label marking PRs whose latest mirror attempt hit a merge conflict.
pub const REBASE_LABEL: &str = "needs: rebase";

/// Number of log lines shown when no error pattern matches.
pub const FALLBACK_TAIL_LINES: usize = 40;

pub const LOG_UNAVAILABLE: &str = "log unavailable";

/// A known shape of error line in CI logs, with the context to show around it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorPattern {
    pub pattern: String,
    #[serde(default = "default_before")]
    pub context_before: usize,
    #[serde(default = "default_after")]
    pub context_after: usize,
}

fn default_before() -> usize {
    2
}

fn default_after() -> usize {
    10
}

impl ErrorPattern {
    pub fn new(pattern: &str) -> Self {
        Self {
            pattern: pattern.to_string(),
            context_before: default_before(),
            context_after: default_after(),
        }
    }
}

/// Highest priority first.
pub fn default_error_patterns() -> Vec<ErrorPattern> {
    vec![
        ErrorPattern::new(r"^Error"),
        ErrorPattern::new(r"^.*\bError:"),
        ErrorPattern::new(r#"^File "[^"]+", line [0-9]+"#),
    ]
}

fn default_reverse_dep_prefix() -> String {
    "ci-".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CiSettings {
    #[serde(default = "default_error_patterns")]
    pub error_patterns: Vec<ErrorPattern>,
    /// Jobs whose successes are reported too.
    #[serde(default)]
    pub always_report_jobs: Vec<String>,
    /// Name prefix of jobs building reverse dependencies.
    #[serde(default = "default_reverse_dep_prefix")]
    pub reverse_dep_prefix: String,
    /// Documentation-producing jobs and the glob of artifact paths to link.
    #[serde(default)]
    pub doc_artifacts: BTreeMap<String, String>,
}

impl Default for CiSettings {
    fn default() -> Self {
        Self {
            error_patterns: default_error_patterns(),
            always_report_jobs: Vec::new(),
            reverse_dep_prefix: default_reverse_dep_prefix(),
            doc_artifacts: BTreeMap::new(),
        }
    }
}

impl CiSettings {
    pub fn is_reverse_dep(&self, job_name: &str) -> bool {
        job_name.starts_with(&self.reverse_dep_prefix)
    }
}

/// Context window around the last match of the highest-priority matching pattern, or the
/// final [`FALLBACK_TAIL_LINES`] lines when nothing matches.
///
/// The result is a contiguous run of log lines, prefixed by one truncation marker line when it
/// had to be cut to [`MAX_SUMMARY_BYTES`].
pub fn extract_error_excerpt(log: &str, patterns: &[ErrorPattern]) -> String {
    if log.is_empty() {
        return String::new();
    }
    let mut lines: Vec<&str> = log.split('\n').collect();
    if log.ends_with('\n') {
        lines.pop();
    }
    let n = lines.len();

    let window = patterns.iter().find_map(|p| {
        let re = Regex::new(&p.pattern).ok()?;
        let last = lines.iter().rposition(|line| re.is_match(line))?;
        Some((last.saturating_sub(p.context_before), (last + p.context_after).min(n - 1)))
    });
    let (start, end) = window.unwrap_or((n.saturating_sub(FALLBACK_TAIL_LINES), n - 1));
    truncate_head(&lines[start..=end].join("\n"), MAX_SUMMARY_BYTES)
}

/// Links to the documentation artifacts of `job`, if the job is configured as doc-producing.
pub fn doc_artifact_links(settings: &CiSettings, job: &CiJob) -> Vec<(String, String)> {
    let Some(glob) = settings.doc_artifacts.get(&job.name) else {
        return Vec::new();
    };
    let Ok(glob) = Glob::new(glob) else {
        return Vec::new();
    };
    let matcher = glob.compile_matcher();
    let mut links: Vec<(String, String)> = job
        .artifacts
        .iter()
        .filter(|a| matcher.is_match(&a.path))
        .map(|a| (a.path.clone(), a.url.clone()))
        .collect();
    // Webhooks do not list artifact files; a literal path can still be linked through the job page.
    let literal = !glob.glob().contains(['*', '?', '[', '{']);
    if links.is_empty() && job.artifacts.is_empty() && literal {
        if let Some(web_url) = &job.web_url {
            let path = glob.glob().to_string();
            links.push((path.clone(), format!("{web_url}/artifacts/file/{path}")));
        }
    }
    links
}

fn render_summary(excerpt: Option<&str>, links: &[(String, String)]) -> String {
    let mut summary = String::new();
    if let Some(excerpt) = excerpt {
        summary.push_str("```\n");
        summary.push_str(excerpt);
        summary.push_str("\n```");
    }
    if !links.is_empty() {
        if !summary.is_empty() {
            summary.push_str("\n\n");
        }
        summary.push_str("Documentation artifacts:");
        for (path, url) in links {
            summary.push_str(&format!("\n- [{path}]({url})"));
        }
    }
    summary
}

fn repo_config<'a>(config: &'a BotConfig, repo: &RepoRef) -> Option<&'a RepoConfig> {
    config.repo(repo)
}

/// Pushes the synthetic merge commit of every opened or updated PR and keeps the rebase label
/// in sync with whether that merge conflicted.
pub struct CiMirror {
    config: Arc<BotConfig>,
}

impl CiMirror {
    pub fn new(config: Arc<BotConfig>) -> Self {
        Self { config }
    }
}

/// Plan for a PR open/update: push, then fix up the rebase label depending on the outcome.
pub fn on_pr_event(pr: &PullRequest, rc: &RepoConfig) -> Plan {
    let mut plan = Plan::new();
    let push = plan.push(ActionKind::PushBranch {
        pr: pr.pr_ref(),
        target: rc.mirror.clone(),
    });
    if pr.has_label(REBASE_LABEL) {
        plan.push_when(actions::remove_label(&pr.pr_ref(), REBASE_LABEL), Condition::Succeeded(push));
    } else {
        plan.push_when(actions::add_label(&pr.pr_ref(), REBASE_LABEL), Condition::Conflicted(push));
    }
    plan
}

#[async_trait]
impl Workflow for CiMirror {
    type Facts = PullRequest;

    fn name(&self) -> &str {
        "ci-mirror"
    }

    fn accepts(&self, event: &Event) -> bool {
        triggers::pr_opened_or_updated(event).is_some_and(|u| self.config.repo(u.repo).is_some())
    }

    async fn gather(&self, event: &Event, gateway: &dyn ForgeGateway) -> GuardResult<PullRequest> {
        let update = triggers::pr_opened_or_updated(event).expect("accepted");
        state::open_pull_request(gateway, &PrRef::new(update.repo.clone(), update.number)).await
    }

    fn plan(&self, event: &Event, pr: &PullRequest) -> Plan {
        let rc = repo_config(&self.config, event.repo()).expect("accepted");
        on_pr_event(pr, rc)
    }
}

/// Deletes the mirror branch of closed PRs.
pub struct MirrorCleanup {
    config: Arc<BotConfig>,
}

impl MirrorCleanup {
    pub fn new(config: Arc<BotConfig>) -> Self {
        Self { config }
    }
}

#[async_trait]
impl Workflow for MirrorCleanup {
    type Facts = ();

    fn name(&self) -> &str {
        "ci-mirror-cleanup"
    }

    fn accepts(&self, event: &Event) -> bool {
        triggers::pr_closed(event).is_some_and(|(repo, _, _)| self.config.repo(repo).is_some())
    }

    async fn gather(&self, _event: &Event, _gateway: &dyn ForgeGateway) -> GuardResult<()> {
        Ok(())
    }

    fn plan(&self, event: &Event, _: &()) -> Plan {
        let (repo, number, _) = triggers::pr_closed(event).expect("accepted");
        let rc = repo_config(&self.config, repo).expect("accepted");
        let mut plan = Plan::new();
        plan.push(ActionKind::DeleteBranch {
            pr: PrRef::new(repo.clone(), number),
            target: rc.mirror.clone(),
        });
        plan
    }
}

/// Reports the overall pipeline status on the origin commit of the tested merge commit.
pub struct PipelineStatus {
    config: Arc<BotConfig>,
}

impl PipelineStatus {
    pub fn new(config: Arc<BotConfig>) -> Self {
        Self { config }
    }
}

pub fn pipeline_status_context(bot_name: &str) -> String {
    format!("{bot_name}/pipeline")
}

#[async_trait]
impl Workflow for PipelineStatus {
    type Facts = Sha;

    fn name(&self) -> &str {
        "ci-pipeline-status"
    }

    fn accepts(&self, event: &Event) -> bool {
        triggers::pipeline_completed(event).is_some_and(|p| self.config.repo(p.repo).is_some())
    }

    async fn gather(&self, event: &Event, gateway: &dyn ForgeGateway) -> GuardResult<Sha> {
        let p = triggers::pipeline_completed(event).expect("accepted");
        state::origin_of_tested_commit(gateway, p.repo, p.tested_sha).await
    }

    fn plan(&self, event: &Event, origin: &Sha) -> Plan {
        let p = triggers::pipeline_completed(event).expect("accepted");
        let (state, verb) = match p.status {
            JobStatus::Success => (StatusState::Success, "succeeded"),
            JobStatus::Failed => (StatusState::Failure, "failed"),
            _ => (StatusState::Error, "was canceled"),
        };
        let mut plan = Plan::new();
        plan.push(ActionKind::ReportStatus {
            repo: p.repo.clone(),
            status: StatusReport {
                context: pipeline_status_context(&self.config.bot_name),
                state,
                description: format!("Pipeline #{} {verb}", p.pipeline_id),
                target_url: p.web_url.map(str::to_string),
                target_sha: origin.clone(),
            },
        });
        plan
    }
}

/// Reports failed jobs as check runs with an error excerpt, and successful jobs only when
/// they are always reported or just turned green.
pub struct JobReport {
    config: Arc<BotConfig>,
}

impl JobReport {
    pub fn new(config: Arc<BotConfig>) -> Self {
        Self { config }
    }
}

pub struct JobFacts {
    origin: Sha,
    report: JobReportKind,
}

enum JobReportKind {
    Failure { log: Option<String> },
    Success,
}

#[async_trait]
impl Workflow for JobReport {
    type Facts = JobFacts;

    fn name(&self) -> &str {
        "ci-job-report"
    }

    fn accepts(&self, event: &Event) -> bool {
        triggers::job_completed(event).is_some_and(|j| {
            self.config.repo(j.repo).is_some() && matches!(j.job.status, JobStatus::Success | JobStatus::Failed)
        })
    }

    async fn gather(&self, event: &Event, gateway: &dyn ForgeGateway) -> GuardResult<JobFacts> {
        let done = triggers::job_completed(event).expect("accepted");
        let rc = repo_config(&self.config, done.repo).expect("accepted");
        let origin = state::origin_of_tested_commit(gateway, done.repo, &done.job.tested_sha).await?;
        let report = if done.job.status == JobStatus::Failed {
            JobReportKind::Failure {
                log: gateway.get_job_log(done.ci_repo, &done.job.log_ref).await.ok(),
            }
        } else if rc.ci.always_report_jobs.contains(&done.job.name)
            || state::last_check_failed(gateway, done.repo, &origin, &done.job.name).await?
        {
            JobReportKind::Success
        } else {
            return Err(GuardError::Refused(format!("success of {} is not reported", done.job.name)));
        };
        Ok(JobFacts { origin, report })
    }

    fn plan(&self, event: &Event, facts: &JobFacts) -> Plan {
        let done = triggers::job_completed(event).expect("accepted");
        let rc = repo_config(&self.config, done.repo).expect("accepted");
        let links = doc_artifact_links(&rc.ci, done.job);
        let report = match &facts.report {
            JobReportKind::Failure { log } => {
                let excerpt = match log {
                    Some(log) => extract_error_excerpt(log, &rc.ci.error_patterns),
                    None => LOG_UNAVAILABLE.to_string(),
                };
                CheckReport::new(
                    &done.job.name,
                    CheckConclusion::Failure,
                    format!("Job {} failed", done.job.name),
                    render_summary(Some(&excerpt), &links),
                    facts.origin.clone(),
                )
            }
            JobReportKind::Success => CheckReport::new(
                &done.job.name,
                CheckConclusion::Success,
                format!("Job {} succeeded", done.job.name),
                render_summary(None, &links),
                facts.origin.clone(),
            ),
        };
        let mut plan = Plan::new();
        plan.push(ActionKind::ReportCheck {
            repo: done.repo.clone(),
            report,
        });
        plan
    }
}

/// Hidden marker deduplicating minimization proposals per pipeline.
pub fn minimization_marker(bot_name: &str, pipeline_id: u64) -> String {
    format!("<!-- {bot_name}:minimize-proposal pipeline={pipeline_id} -->")
}

/// Failing reverse-dependency jobs of the latest PR pipeline whose counterpart on the most
/// recent base-branch pipeline succeeded.
pub async fn eligible_minimization_jobs(
    gateway: &dyn ForgeGateway,
    settings: &CiSettings,
    ci_repo: &RepoRef,
    pr_branch: &str,
    base_branch: &str,
) -> GuardResult<Vec<String>> {
    let pr_jobs = gateway.latest_pipeline_jobs(ci_repo, pr_branch).await?;
    let base_jobs = gateway.latest_pipeline_jobs(ci_repo, base_branch).await?;
    let green_on_base: BTreeSet<&str> = base_jobs
        .iter()
        .filter(|j| j.status == JobStatus::Success)
        .map(|j| j.name.as_str())
        .collect();
    let mut eligible: Vec<String> = pr_jobs
        .iter()
        .filter(|j| j.status == JobStatus::Failed && settings.is_reverse_dep(&j.name))
        .filter(|j| green_on_base.contains(j.name.as_str()))
        .map(|j| j.name.clone())
        .collect();
    eligible.sort();
    eligible.dedup();
    Ok(eligible)
}

/// Suggests running the minimizer when a reverse dependency fails on the PR but passes on the
/// base branch. One proposal per pipeline.
pub struct MinimizationProposal {
    config: Arc<BotConfig>,
}

impl MinimizationProposal {
    pub fn new(config: Arc<BotConfig>) -> Self {
        Self { config }
    }
}

pub struct ProposalFacts {
    pr: PrRef,
    failing: Vec<String>,
}

#[async_trait]
impl Workflow for MinimizationProposal {
    type Facts = ProposalFacts;

    fn name(&self) -> &str {
        "ci-minimize-proposal"
    }

    fn accepts(&self, event: &Event) -> bool {
        triggers::job_completed(event).is_some_and(|j| {
            j.job.status == JobStatus::Failed
                && j.pr_number.is_some()
                && self.config.repo(j.repo).is_some_and(|rc| rc.ci.is_reverse_dep(&j.job.name))
        })
    }

    async fn gather(&self, event: &Event, gateway: &dyn ForgeGateway) -> GuardResult<ProposalFacts> {
        let done = triggers::job_completed(event).expect("accepted");
        let rc = repo_config(&self.config, done.repo).expect("accepted");
        let pr_ref = PrRef::new(done.repo.clone(), done.pr_number.expect("accepted"));
        let pr = state::open_pull_request(gateway, &pr_ref).await?;
        let marker = minimization_marker(&self.config.bot_name, done.job.pipeline_id);
        if !gateway.bot_comments(&pr_ref, &marker).await?.is_empty() {
            return Err(GuardError::Refused("minimization already proposed for this pipeline".into()));
        }
        let mut failing =
            eligible_minimization_jobs(gateway, &rc.ci, done.ci_repo, done.branch, &pr.base_branch).await?;
        if !failing.contains(&done.job.name) {
            let base_jobs = gateway.latest_pipeline_jobs(done.ci_repo, &pr.base_branch).await?;
            let green_on_base = base_jobs
                .iter()
                .any(|j| j.name == done.job.name && j.status == JobStatus::Success);
            if !green_on_base {
                return Err(GuardError::Refused(format!("{} also fails on {}", done.job.name, pr.base_branch)));
            }
            failing.push(done.job.name.clone());
            failing.sort();
        }
        Ok(ProposalFacts { pr: pr_ref, failing })
    }

    fn plan(&self, event: &Event, facts: &ProposalFacts) -> Plan {
        let done = triggers::job_completed(event).expect("accepted");
        let bot = &self.config.bot_name;
        let mut body = format!("{}\n", minimization_marker(bot, done.job.pipeline_id));
        body.push_str("The following reverse dependencies fail on this PR but pass on the base branch:\n");
        for name in &facts.failing {
            body.push_str(&format!("- {name}\n"));
        }
        body.push_str(&format!(
            "\nTo try to minimize the failure, comment:\n\n    @{bot}: ci minimize\n\nor name specific jobs with `@{bot}: ci minimize <job>...`."
        ));
        let mut plan = Plan::new();
        plan.push(actions::comment(&facts.pr, body));
        plan
    }
}

/// Variable carrying the minimization target on triggered pipelines.
pub const MINIMIZE_TARGET_VAR: &str = "BOT_MINIMIZE_TARGET";
pub const MINIMIZE_PR_VAR: &str = "BOT_MINIMIZE_PR";

/// Plan for a `ci minimize` command. `eligible` is the set of failing reverse-dependency jobs.
pub fn trigger_minimization(
    pr: &PullRequest,
    requested: &[String],
    eligible: &[String],
    rc: &RepoConfig,
) -> Plan {
    let targets: Vec<&String> = if requested.is_empty() {
        eligible.iter().collect()
    } else {
        requested.iter().collect()
    };
    let mut plan = Plan::new();
    if targets.is_empty() {
        plan.push(actions::comment(
            &pr.pr_ref(),
            "There is nothing to minimize: no reverse dependency fails on this PR while passing on the base branch.",
        ));
        return plan;
    }
    for target in &targets {
        plan.push(ActionKind::TriggerPipeline {
            ci_repo: rc.mirror.ci_repo.clone(),
            branch: rc.mirror.branch_for(pr.number),
            variables: BTreeMap::from([
                (MINIMIZE_TARGET_VAR.to_string(), target.to_string()),
                (MINIMIZE_PR_VAR.to_string(), pr.number.to_string()),
            ]),
        });
    }
    let mut ack = String::from("Minimization started for:");
    for target in &targets {
        ack.push_str(&format!("\n- {target}"));
    }
    plan.push(actions::comment(&pr.pr_ref(), ack));
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Artifact, LogRef, TRUNCATION_MARKER};
    use proptest::prelude::*;

    /// Independent oracle: scans every line against every pattern and keeps the highest line
    /// index for the first pattern (in priority order) that has any match.
    fn oracle_window(lines: &[&str], patterns: &[ErrorPattern]) -> (usize, usize) {
        let n = lines.len();
        for p in patterns {
            let re = Regex::new(&p.pattern).unwrap();
            let mut best: Option<usize> = None;
            for (i, line) in lines.iter().enumerate() {
                if re.is_match(line) {
                    best = Some(best.map_or(i, |b: usize| b.max(i)));
                }
            }
            if let Some(i) = best {
                let start = if i >= p.context_before { i - p.context_before } else { 0 };
                let end = std::cmp::min(i + p.context_after, n - 1);
                return (start, end);
            }
        }
        (if n > 40 { n - 40 } else { 0 }, n - 1)
    }

    #[test]
    fn excerpt_contains_error_line() {
        let log = "building\nError: The reference foo was not found in the current environment.\nmake: *** failed";
        let excerpt = extract_error_excerpt(log, &default_error_patterns());
        assert!(excerpt.contains("Error: The reference foo was not found"));
    }

    #[test]
    fn empty_log_gives_empty_excerpt() {
        assert_eq!(extract_error_excerpt("", &default_error_patterns()), "");
    }

    #[test]
    fn last_of_two_errors_wins() {
        let mut lines: Vec<String> = (0..60).map(|i| format!("step {i}")).collect();
        lines[10] = "Error: first".into();
        lines[40] = "Error: second".into();
        let log = lines.join("\n");
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let (start, end) = oracle_window(&refs, &default_error_patterns());
        assert_eq!((start, end), (38, 50));
        let excerpt = extract_error_excerpt(&log, &default_error_patterns());
        assert_eq!(excerpt, refs[start..=end].join("\n"));
        assert!(!excerpt.contains("Error: first"));
    }

    #[test]
    fn priority_beats_position() {
        let log = "Error at start\nx\nFile \"a.v\", line 3, characters 0-5:\ny";
        let excerpt = extract_error_excerpt(
            log,
            &[
                ErrorPattern { context_before: 0, context_after: 0, ..ErrorPattern::new(r"^Error") },
                ErrorPattern::new(r#"^File "[^"]+", line [0-9]+"#),
            ],
        );
        assert_eq!(excerpt, "Error at start");
    }

    #[test]
    fn fallback_is_last_forty_lines() {
        let lines: Vec<String> = (0..100).map(|i| format!("ok {i}")).collect();
        let excerpt = extract_error_excerpt(&(lines.join("\n") + "\n"), &default_error_patterns());
        assert_eq!(excerpt, lines[60..].join("\n"));
    }

    #[test]
    fn oversized_excerpt_is_truncated_with_marker() {
        let big = "x".repeat(1000);
        let lines: Vec<String> = (0..200).map(|_| big.clone()).collect();
        let wide = ErrorPattern { context_before: 500, context_after: 500, ..ErrorPattern::new("^x") };
        let excerpt = extract_error_excerpt(&lines.join("\n"), &[wide]);
        assert!(excerpt.len() <= MAX_SUMMARY_BYTES);
        assert!(excerpt.ends_with(&big));
        assert!(excerpt.starts_with(TRUNCATION_MARKER));
    }

    fn line_strategy() -> impl Strategy<Value = String> {
        prop_oneof![
            4 => "[a-z ]{0,12}",
            1 => "Error[: a-z]{0,8}",
            1 => "[a-z]{1,4} Error: [a-z]{0,5}",
            1 => "File \"[a-z]{1,3}\\.v\", line [0-9]{1,3}",
        ]
    }

    proptest! {
        #[test]
        fn excerpt_matches_oracle(lines in prop::collection::vec(line_strategy(), 1..120)) {
            let log = lines.join("\n") + "\n";
            let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
            let (start, end) = oracle_window(&refs, &default_error_patterns());
            let excerpt = extract_error_excerpt(&log, &default_error_patterns());
            prop_assert_eq!(&excerpt, &refs[start..=end].join("\n"));
            prop_assert!(log.contains(&excerpt));
        }
    }

    fn job(name: &str, artifacts: Vec<Artifact>, web_url: Option<&str>) -> CiJob {
        CiJob {
            id: 1,
            pipeline_id: 1,
            name: name.into(),
            status: JobStatus::Success,
            log_ref: LogRef("1".into()),
            artifacts,
            tested_sha: Sha::parse(&"a".repeat(40)).unwrap(),
            web_url: web_url.map(str::to_string),
        }
    }

    #[test]
    fn doc_links_filtered_by_glob() {
        let mut settings = CiSettings::default();
        settings.doc_artifacts.insert("doc:refman".into(), "_build/**/*.html".into());
        let j = job(
            "doc:refman",
            vec![
                Artifact { path: "_build/refman/index.html".into(), url: "https://ci/a/index.html".into() },
                Artifact { path: "_build/refman/log.txt".into(), url: "https://ci/a/log.txt".into() },
            ],
            None,
        );
        assert_eq!(
            doc_artifact_links(&settings, &j),
            vec![("_build/refman/index.html".to_string(), "https://ci/a/index.html".to_string())]
        );
        assert!(doc_artifact_links(&settings, &job("build", vec![], None)).is_empty());
    }

    #[test]
    fn literal_doc_path_linked_through_job_page() {
        let mut settings = CiSettings::default();
        settings.doc_artifacts.insert("doc:refman".into(), "refman/index.html".into());
        let j = job("doc:refman", vec![], Some("https://gitlab.example/coq/coq/-/jobs/9"));
        assert_eq!(
            doc_artifact_links(&settings, &j)[0].1,
            "https://gitlab.example/coq/coq/-/jobs/9/artifacts/file/refman/index.html"
        );
    }
}
