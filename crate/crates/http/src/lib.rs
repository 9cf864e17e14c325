//! [`ForgeGateway`] over the GitHub REST and GraphQL APIs, with GitLab REST for the CI side.
//!
//! Repositories listed in [`HttpConfig::ci_repos`] are GitLab projects; everything else is
//! on GitHub. Mirror pushes build the synthetic merge commit with GitHub's merges endpoint
//! on a branch named after the mirror branch, then ask the GitLab project (configured as a
//! pull mirror of the GitHub repository) to pull.

pub mod graphql;

use std::collections::{BTreeSet, HashMap};
use std::num::NonZeroUsize;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use lru::LruCache;
use reqwest::header::{HeaderMap, ACCEPT, AUTHORIZATION, USER_AGENT};
use reqwest::{Method, StatusCode, Url};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use forgebot_core::action::{mirror_commit_message, Action, ActionKind, ActionOutcome};
use forgebot_core::engine::DEFAULT_DEDUP_CAPACITY;
use forgebot_core::gateway::{ForgeGateway, GatewayResult};
use forgebot_core::model::{
    BoardCard, CheckConclusion, CheckReport, ChecksRollup, CiJob, Comment, Commit, JobStatus, LogRef, Mergeable,
    MilestoneRef, PrRef, PrState, PullRequest, RepoRef, ReviewDecision, Sha, StatusState,
};
use forgebot_core::GatewayError;

use graphql::Query;

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// REST root, e.g. `https://api.github.com`. GraphQL is served at `{github_api}/graphql`.
    pub github_api: String,
    /// REST root, e.g. `https://gitlab.com/api/v4`.
    pub gitlab_api: String,
    pub github_token: String,
    pub gitlab_token: String,
    pub bot_name: String,
    pub ci_repos: BTreeSet<RepoRef>,
    /// First backoff after a throttled response; doubles on each retry.
    pub retry_base: Duration,
    pub max_retries: u32,
    /// Concurrent requests allowed per host.
    pub max_in_flight: usize,
    pub team_cache_ttl: Duration,
}

impl HttpConfig {
    pub fn new(bot_name: &str, github_token: &str, gitlab_token: &str) -> Self {
        Self {
            github_api: "https://api.github.com".into(),
            gitlab_api: "https://gitlab.com/api/v4".into(),
            github_token: github_token.into(),
            gitlab_token: gitlab_token.into(),
            bot_name: bot_name.into(),
            ci_repos: BTreeSet::new(),
            retry_base: Duration::from_secs(1),
            max_retries: 3,
            max_in_flight: 8,
            team_cache_ttl: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Host {
    GitHub,
    GitLab,
}

struct Reply {
    status: StatusCode,
    body: String,
    /// Still rate limited after the last retry.
    throttled: bool,
}

impl Reply {
    fn json<T: DeserializeOwned>(&self) -> GatewayResult<T> {
        serde_json::from_str(&self.body).map_err(|e| GatewayError::Protocol(format!("decoding response: {e}")))
    }

    fn is_success(&self) -> bool {
        self.status.is_success()
    }
}

fn throttled(status: StatusCode, headers: &HeaderMap) -> bool {
    status == StatusCode::TOO_MANY_REQUESTS
        || (status == StatusCode::FORBIDDEN
            && headers.get("x-ratelimit-remaining").is_some_and(|v| v.as_bytes() == b"0"))
        || matches!(status, StatusCode::BAD_GATEWAY | StatusCode::SERVICE_UNAVAILABLE)
}

/// Maps an unsuccessful reply to the gateway error taxonomy.
fn failure(reply: &Reply, what: &str) -> GatewayError {
    let detail = format!("{what}: HTTP {} {}", reply.status.as_u16(), reply.body.chars().take(200).collect::<String>());
    if reply.throttled {
        return GatewayError::Transient(detail);
    }
    match reply.status {
        StatusCode::NOT_FOUND => GatewayError::NotFound(detail),
        StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => GatewayError::PermissionDenied(detail),
        StatusCode::UNPROCESSABLE_ENTITY | StatusCode::BAD_REQUEST => GatewayError::Invalid(detail),
        StatusCode::CONFLICT => GatewayError::MergeConflict,
        s if s == StatusCode::TOO_MANY_REQUESTS || s.is_server_error() => GatewayError::Transient(detail),
        _ => GatewayError::Protocol(detail),
    }
}

fn ok(reply: Reply, what: &str) -> GatewayResult<Reply> {
    if reply.is_success() {
        Ok(reply)
    } else {
        Err(failure(&reply, what))
    }
}

fn parse_sha(s: &str) -> GatewayResult<Sha> {
    Sha::parse(s).map_err(|e| GatewayError::Protocol(e.to_string()))
}

/// Trailing number of an API URL such as `.../issues/42`.
fn trailing_number(url: &str) -> Option<u64> {
    url.rsplit('/').next()?.parse().ok()
}

#[derive(Deserialize)]
struct IdName {
    id: u64,
    name: String,
}

#[derive(Deserialize)]
struct Card {
    id: u64,
    #[serde(default)]
    content_url: Option<String>,
}

struct BoardColumn {
    id: u64,
    name: String,
    /// (card id, PR number)
    cards: Vec<(u64, u64)>,
}

struct Board {
    project_id: u64,
    columns: Vec<BoardColumn>,
}

impl Board {
    fn find(&self, number: u64) -> Option<(&BoardColumn, u64)> {
        self.columns
            .iter()
            .find_map(|c| c.cards.iter().find(|(_, n)| *n == number).map(|(id, _)| (c, *id)))
    }
}

pub struct HttpGateway {
    config: HttpConfig,
    client: reqwest::Client,
    github_slots: Semaphore,
    gitlab_slots: Semaphore,
    teams: Mutex<HashMap<(String, String, String), (Instant, bool)>>,
    applied: Mutex<LruCache<String, ActionOutcome>>,
}

impl HttpGateway {
    pub fn new(config: HttpConfig) -> Self {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .expect("HTTP client configuration is static");
        Self {
            github_slots: Semaphore::new(config.max_in_flight),
            gitlab_slots: Semaphore::new(config.max_in_flight),
            config,
            client,
            teams: Mutex::new(HashMap::new()),
            applied: Mutex::new(LruCache::new(
                NonZeroUsize::new(DEFAULT_DEDUP_CAPACITY).expect("non-zero"),
            )),
        }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn url(&self, host: Host, segments: &[&str], query: &[(&str, &str)]) -> GatewayResult<Url> {
        let base = match host {
            Host::GitHub => &self.config.github_api,
            Host::GitLab => &self.config.gitlab_api,
        };
        let mut url = Url::parse(base).map_err(|e| GatewayError::Invalid(format!("base URL {base}: {e}")))?;
        url.path_segments_mut()
            .map_err(|()| GatewayError::Invalid(format!("base URL {base} cannot have a path")))?
            .pop_if_empty()
            .extend(segments);
        if !query.is_empty() {
            url.query_pairs_mut().extend_pairs(query);
        }
        Ok(url)
    }

    async fn send(
        &self,
        host: Host,
        method: Method,
        segments: &[&str],
        query: &[(&str, &str)],
        body: Option<&Value>,
    ) -> GatewayResult<Reply> {
        let url = self.url(host, segments, query)?;
        let slots = match host {
            Host::GitHub => &self.github_slots,
            Host::GitLab => &self.gitlab_slots,
        };
        let mut attempt = 0;
        loop {
            let permit = slots.acquire().await.expect("semaphore never closed");
            let mut request = self
                .client
                .request(method.clone(), url.clone())
                .header(USER_AGENT, &self.config.bot_name);
            request = match host {
                Host::GitHub => request
                    .header(AUTHORIZATION, format!("Bearer {}", self.config.github_token))
                    .header(ACCEPT, "application/vnd.github+json"),
                Host::GitLab => request.header("PRIVATE-TOKEN", &self.config.gitlab_token),
            };
            if let Some(body) = body {
                request = request.json(body);
            }
            let result = request.send().await;
            let outcome = match result {
                Ok(response) => {
                    let status = response.status();
                    let headers = response.headers().clone();
                    let text = response
                        .text()
                        .await
                        .map_err(|e| GatewayError::Transient(format!("{method} {url}: {e}")))?;
                    let throttled = throttled(status, &headers);
                    (throttled, Ok(Reply { status, body: text, throttled }))
                }
                Err(e) => (true, Err(GatewayError::Transient(format!("{method} {url}: {e}")))),
            };
            drop(permit);
            match outcome {
                (true, result) if attempt < self.config.max_retries => {
                    let delay = self.config.retry_base * 2u32.pow(attempt);
                    tracing::debug!(%url, attempt, ?delay, "retrying throttled request");
                    tokio::time::sleep(delay).await;
                    attempt += 1;
                    drop(result);
                }
                (_, result) => return result,
            }
        }
    }

    async fn gh(&self, method: Method, segments: &[&str], body: Option<&Value>) -> GatewayResult<Reply> {
        self.send(Host::GitHub, method, segments, &[], body).await
    }

    async fn gh_get<T: DeserializeOwned>(&self, segments: &[&str], what: &str) -> GatewayResult<T> {
        ok(self.gh(Method::GET, segments, None).await?, what)?.json()
    }

    async fn gl(&self, method: Method, project: &RepoRef, rest: &[&str], query: &[(&str, &str)], body: Option<&Value>) -> GatewayResult<Reply> {
        let id = project.to_string();
        let mut segments = vec!["projects", id.as_str()];
        segments.extend_from_slice(rest);
        self.send(Host::GitLab, method, &segments, query, body).await
    }

    async fn query<Q: Query>(&self, variables: &Q::Variables) -> GatewayResult<Q::Data> {
        let document = graphql::document::<Q>();
        let request = graphql::Request {
            query: &document,
            operation_name: Q::OPERATION,
            variables,
        };
        let body = serde_json::to_value(&request).map_err(|e| GatewayError::Protocol(e.to_string()))?;
        let reply = ok(self.gh(Method::POST, &["graphql"], Some(&body)).await?, Q::OPERATION)?;
        let response: graphql::Response<Q::Data> = reply.json()?;
        if let Some(e) = response.errors.first() {
            return Err(match e.kind.as_deref() {
                Some("NOT_FOUND") => GatewayError::NotFound(e.message.clone()),
                Some("FORBIDDEN") => GatewayError::PermissionDenied(e.message.clone()),
                Some("RATE_LIMITED") => GatewayError::Transient(e.message.clone()),
                _ => GatewayError::Protocol(format!("{}: {}", Q::OPERATION, e.message)),
            });
        }
        response
            .data
            .ok_or_else(|| GatewayError::Protocol(format!("{}: response without data", Q::OPERATION)))
    }

    fn is_ci_repo(&self, repo: &RepoRef) -> bool {
        self.config.ci_repos.contains(repo)
    }

    async fn board(&self, repo: &RepoRef, name: &str) -> GatewayResult<Option<Board>> {
        let projects: Vec<IdName> = self
            .gh_get(&["repos", repo.owner(), repo.name(), "projects"], "listing projects")
            .await?;
        let Some(project) = projects.into_iter().find(|p| p.name == name) else {
            return Ok(None);
        };
        let pid = project.id.to_string();
        let columns: Vec<IdName> = self.gh_get(&["projects", &pid, "columns"], "listing columns").await?;
        let mut board = Board {
            project_id: project.id,
            columns: Vec::new(),
        };
        for column in columns {
            let cid = column.id.to_string();
            let cards: Vec<Card> = self
                .gh_get(&["projects", "columns", &cid, "cards"], "listing cards")
                .await?;
            board.columns.push(BoardColumn {
                id: column.id,
                name: column.name,
                cards: cards
                    .iter()
                    .filter_map(|c| Some((c.id, trailing_number(c.content_url.as_deref()?)?)))
                    .collect(),
            });
        }
        Ok(Some(board))
    }

    async fn ensure_column(&self, board: &Board, column: &str) -> GatewayResult<u64> {
        if let Some(c) = board.columns.iter().find(|c| c.name == column) {
            return Ok(c.id);
        }
        let pid = board.project_id.to_string();
        let reply = self
            .gh(Method::POST, &["projects", &pid, "columns"], Some(&json!({ "name": column })))
            .await?;
        Ok(ok(reply, "creating column")?.json::<IdName>()?.id)
    }

    async fn ensure_board(&self, repo: &RepoRef, name: &str) -> GatewayResult<Board> {
        if let Some(board) = self.board(repo, name).await? {
            return Ok(board);
        }
        let reply = self
            .gh(
                Method::POST,
                &["repos", repo.owner(), repo.name(), "projects"],
                Some(&json!({ "name": name })),
            )
            .await?;
        let project: IdName = ok(reply, "creating project")?.json()?;
        Ok(Board {
            project_id: project.id,
            columns: Vec::new(),
        })
    }

    async fn branch_head(&self, repo: &RepoRef, branch: &str) -> GatewayResult<Sha> {
        #[derive(Deserialize)]
        struct Object {
            sha: String,
        }
        #[derive(Deserialize)]
        struct Ref {
            object: Object,
        }
        let r: Ref = self
            .gh_get(&["repos", repo.owner(), repo.name(), "git", "ref", "heads", branch], "reading branch")
            .await?;
        parse_sha(&r.object.sha)
    }

    async fn perform(&self, kind: &ActionKind) -> GatewayResult<ActionOutcome> {
        match kind {
            ActionKind::PostComment { pr, body } => {
                let n = pr.number.to_string();
                let reply = self
                    .gh(
                        Method::POST,
                        &["repos", pr.repo.owner(), pr.repo.name(), "issues", &n, "comments"],
                        Some(&json!({ "body": body })),
                    )
                    .await?;
                ok(reply, "posting comment")?;
                Ok(ActionOutcome::Applied)
            }
            ActionKind::AddLabel { pr, label } => {
                let n = pr.number.to_string();
                let reply = self
                    .gh(
                        Method::POST,
                        &["repos", pr.repo.owner(), pr.repo.name(), "issues", &n, "labels"],
                        Some(&json!({ "labels": [label] })),
                    )
                    .await?;
                ok(reply, "adding label")?;
                Ok(ActionOutcome::Applied)
            }
            ActionKind::RemoveLabel { pr, label } => {
                let n = pr.number.to_string();
                let reply = self
                    .gh(
                        Method::DELETE,
                        &["repos", pr.repo.owner(), pr.repo.name(), "issues", &n, "labels", label],
                        None,
                    )
                    .await?;
                if reply.status == StatusCode::NOT_FOUND {
                    return Ok(ActionOutcome::NoChange);
                }
                ok(reply, "removing label")?;
                Ok(ActionOutcome::Applied)
            }
            ActionKind::SetMilestone { pr, title } => {
                #[derive(Deserialize)]
                struct M {
                    number: u64,
                    title: String,
                }
                let reply = self
                    .send(
                        Host::GitHub,
                        Method::GET,
                        &["repos", pr.repo.owner(), pr.repo.name(), "milestones"],
                        &[("state", "all"), ("per_page", "100")],
                        None,
                    )
                    .await?;
                let milestones: Vec<M> = ok(reply, "listing milestones")?.json()?;
                let m = milestones
                    .into_iter()
                    .find(|m| m.title == *title)
                    .ok_or_else(|| GatewayError::Invalid(format!("no milestone titled {title:?} in {}", pr.repo)))?;
                let n = pr.number.to_string();
                let reply = self
                    .gh(
                        Method::PATCH,
                        &["repos", pr.repo.owner(), pr.repo.name(), "issues", &n],
                        Some(&json!({ "milestone": m.number })),
                    )
                    .await?;
                ok(reply, "setting milestone")?;
                Ok(ActionOutcome::Applied)
            }
            ActionKind::ClosePr { pr } => {
                let n = pr.number.to_string();
                let reply = self
                    .gh(
                        Method::PATCH,
                        &["repos", pr.repo.owner(), pr.repo.name(), "pulls", &n],
                        Some(&json!({ "state": "closed" })),
                    )
                    .await?;
                ok(reply, "closing PR")?;
                Ok(ActionOutcome::Applied)
            }
            ActionKind::MergePr { pr, message } => {
                let (title, body) = message.split_once('\n').unwrap_or((message, ""));
                let n = pr.number.to_string();
                let reply = self
                    .gh(
                        Method::PUT,
                        &["repos", pr.repo.owner(), pr.repo.name(), "pulls", &n, "merge"],
                        Some(&json!({
                            "commit_title": title,
                            "commit_message": body.trim_start_matches('\n'),
                            "merge_method": "merge",
                        })),
                    )
                    .await?;
                match reply.status {
                    StatusCode::METHOD_NOT_ALLOWED => Ok(ActionOutcome::Conflict),
                    StatusCode::CONFLICT => Err(GatewayError::Invalid("PR head changed during merge".into())),
                    _ => {
                        #[derive(Deserialize)]
                        struct Merged {
                            sha: String,
                        }
                        let merged: Merged = ok(reply, "merging PR")?.json()?;
                        Ok(ActionOutcome::Merged {
                            sha: parse_sha(&merged.sha)?,
                        })
                    }
                }
            }
            ActionKind::PushBranch { pr, target } => {
                let state = self.get_pull_request(pr).await?;
                let base_head = self.branch_head(&pr.repo, &state.base_branch).await?;
                let branch = target.branch_for(pr.number);
                let (owner, name) = (pr.repo.owner(), pr.repo.name());
                let reset = self
                    .gh(
                        Method::PATCH,
                        &["repos", owner, name, "git", "refs", "heads", &branch],
                        Some(&json!({ "sha": base_head.as_str(), "force": true })),
                    )
                    .await?;
                if !reset.is_success() {
                    let created = self
                        .gh(
                            Method::POST,
                            &["repos", owner, name, "git", "refs"],
                            Some(&json!({ "ref": format!("refs/heads/{branch}"), "sha": base_head.as_str() })),
                        )
                        .await?;
                    ok(created, "creating staging branch")?;
                }
                let message = mirror_commit_message(pr.number, &state.head_sha, &state.base_branch, &base_head);
                let reply = self
                    .gh(
                        Method::POST,
                        &["repos", owner, name, "merges"],
                        Some(&json!({ "base": branch, "head": state.head_sha.as_str(), "commit_message": message })),
                    )
                    .await?;
                if reply.status == StatusCode::CONFLICT {
                    return Ok(ActionOutcome::Conflict);
                }
                if reply.status == StatusCode::NO_CONTENT {
                    return Err(GatewayError::Invalid(format!("head of {pr} is already contained in its base")));
                }
                #[derive(Deserialize)]
                struct Merge {
                    sha: String,
                }
                let merge: Merge = ok(reply, "creating merge commit")?.json()?;
                let pull = self.gl(Method::POST, &target.ci_repo, &["mirror", "pull"], &[], None).await?;
                ok(pull, "triggering mirror pull")?;
                Ok(ActionOutcome::Pushed {
                    sha: parse_sha(&merge.sha)?,
                })
            }
            ActionKind::DeleteBranch { pr, target } => {
                let branch = target.branch_for(pr.number);
                let github = self
                    .gh(
                        Method::DELETE,
                        &["repos", pr.repo.owner(), pr.repo.name(), "git", "refs", "heads", &branch],
                        None,
                    )
                    .await?;
                let gitlab = self
                    .gl(Method::DELETE, &target.ci_repo, &["repository", "branches", &branch], &[], None)
                    .await?;
                let mut deleted = false;
                for reply in [github, gitlab] {
                    if reply.is_success() {
                        deleted = true;
                    } else if !matches!(reply.status, StatusCode::NOT_FOUND | StatusCode::UNPROCESSABLE_ENTITY) {
                        return Err(failure(&reply, "deleting mirror branch"));
                    }
                }
                Ok(if deleted { ActionOutcome::Applied } else { ActionOutcome::NoChange })
            }
            ActionKind::ReportCheck { repo, report } => {
                let conclusion = match report.conclusion {
                    CheckConclusion::Success => "success",
                    CheckConclusion::Failure => "failure",
                    CheckConclusion::Neutral => "neutral",
                };
                let reply = self
                    .gh(
                        Method::POST,
                        &["repos", repo.owner(), repo.name(), "check-runs"],
                        Some(&json!({
                            "name": report.name,
                            "head_sha": report.target_sha.as_str(),
                            "status": "completed",
                            "conclusion": conclusion,
                            "output": { "title": report.title, "summary": report.summary() },
                        })),
                    )
                    .await?;
                ok(reply, "creating check run")?;
                Ok(ActionOutcome::Applied)
            }
            ActionKind::ReportStatus { repo, status } => {
                let state = match status.state {
                    StatusState::Pending => "pending",
                    StatusState::Success => "success",
                    StatusState::Failure => "failure",
                    StatusState::Error => "error",
                };
                let reply = self
                    .gh(
                        Method::POST,
                        &["repos", repo.owner(), repo.name(), "statuses", status.target_sha.as_str()],
                        Some(&json!({
                            "state": state,
                            "context": status.context,
                            "description": status.description,
                            "target_url": status.target_url,
                        })),
                    )
                    .await?;
                ok(reply, "setting status")?;
                Ok(ActionOutcome::Applied)
            }
            ActionKind::CreateCard { pr, board, column } => {
                let b = self.ensure_board(&pr.repo, board).await?;
                if b.find(pr.number).is_some() {
                    return Ok(ActionOutcome::NoChange);
                }
                let column_id = self.ensure_column(&b, column).await?.to_string();
                #[derive(Deserialize)]
                struct Id {
                    id: u64,
                }
                let n = pr.number.to_string();
                let issue: Id = self
                    .gh_get(&["repos", pr.repo.owner(), pr.repo.name(), "pulls", &n], "reading PR id")
                    .await?;
                let reply = self
                    .gh(
                        Method::POST,
                        &["projects", "columns", &column_id, "cards"],
                        Some(&json!({ "content_id": issue.id, "content_type": "PullRequest" })),
                    )
                    .await?;
                ok(reply, "creating card")?;
                Ok(ActionOutcome::Applied)
            }
            ActionKind::MoveCard { pr, board, column } => {
                let b = self
                    .board(&pr.repo, board)
                    .await?
                    .ok_or_else(|| GatewayError::NotFound(format!("board {board:?}")))?;
                let (from, card) = b
                    .find(pr.number)
                    .ok_or_else(|| GatewayError::NotFound(format!("no card for {pr} on {board:?}")))?;
                if from.name == *column {
                    return Ok(ActionOutcome::NoChange);
                }
                let column_id = self.ensure_column(&b, column).await?;
                let card = card.to_string();
                let reply = self
                    .gh(
                        Method::POST,
                        &["projects", "columns", "cards", &card, "moves"],
                        Some(&json!({ "position": "bottom", "column_id": column_id })),
                    )
                    .await?;
                ok(reply, "moving card")?;
                Ok(ActionOutcome::Applied)
            }
            ActionKind::DeleteCard { pr, board } => {
                let Some(b) = self.board(&pr.repo, board).await? else {
                    return Ok(ActionOutcome::NoChange);
                };
                let Some((_, card)) = b.find(pr.number) else {
                    return Ok(ActionOutcome::NoChange);
                };
                let card = card.to_string();
                let reply = self.gh(Method::DELETE, &["projects", "columns", "cards", &card], None).await?;
                ok(reply, "deleting card")?;
                Ok(ActionOutcome::Applied)
            }
            ActionKind::TriggerPipeline {
                ci_repo,
                branch,
                variables,
            } => {
                let variables: Vec<Value> = variables
                    .iter()
                    .map(|(k, v)| json!({ "key": k, "value": v }))
                    .collect();
                let reply = self
                    .gl(
                        Method::POST,
                        ci_repo,
                        &["pipeline"],
                        &[],
                        Some(&json!({ "ref": branch, "variables": variables })),
                    )
                    .await?;
                ok(reply, "triggering pipeline")?;
                Ok(ActionOutcome::Applied)
            }
        }
    }
}

fn to_pull_request(repo: &RepoRef, node: graphql::PrNode) -> GatewayResult<PullRequest> {
    let state = match node.state.as_str() {
        "OPEN" => PrState::Open,
        "CLOSED" => PrState::Closed,
        "MERGED" => PrState::Merged,
        other => return Err(GatewayError::Protocol(format!("unknown PR state {other}"))),
    };
    let mergeable = match node.mergeable.as_str() {
        "MERGEABLE" => Mergeable::Mergeable,
        "CONFLICTING" => Mergeable::Conflicting,
        _ => Mergeable::Unknown,
    };
    let head_repo = match node.head_repository {
        Some(r) => r
            .name_with_owner
            .parse()
            .map_err(|e: forgebot_core::ModelError| GatewayError::Protocol(e.to_string()))?,
        None => repo.clone(),
    };
    Ok(PullRequest {
        repo: repo.clone(),
        number: node.number,
        title: node.title,
        body: node.body,
        author: node.author.map(|a| a.login).unwrap_or_else(|| "ghost".into()),
        base_branch: node.base_ref_name,
        head_sha: parse_sha(&node.head_ref_oid)?,
        head_repo,
        draft: node.is_draft,
        state,
        labels: node.labels.nodes.into_iter().map(|l| l.name).collect(),
        milestone: node.milestone.map(|m| MilestoneRef {
            id: m.number,
            title: m.title,
            description: m.description.unwrap_or_default(),
        }),
        assignees: node.assignees.nodes.into_iter().map(|a| a.login).collect(),
        reviews: node
            .latest_opinionated_reviews
            .nodes
            .into_iter()
            .filter_map(|r| {
                let decision = match r.state.as_str() {
                    "APPROVED" => ReviewDecision::Approved,
                    "CHANGES_REQUESTED" => ReviewDecision::ChangesRequested,
                    "COMMENTED" => ReviewDecision::Commented,
                    _ => return None,
                };
                Some((r.author?.login, decision))
            })
            .collect(),
        mergeable,
    })
}

fn job_status(s: &str) -> JobStatus {
    match s {
        "success" => JobStatus::Success,
        "failed" => JobStatus::Failed,
        "canceled" | "skipped" => JobStatus::Canceled,
        "running" => JobStatus::Running,
        _ => JobStatus::Pending,
    }
}

#[derive(Deserialize)]
struct CheckRun {
    id: u64,
    name: String,
    status: String,
    conclusion: Option<String>,
    head_sha: String,
    #[serde(default)]
    output: CheckOutput,
}

#[derive(Deserialize, Default)]
struct CheckOutput {
    title: Option<String>,
    summary: Option<String>,
}

#[derive(Deserialize)]
struct CheckRuns {
    check_runs: Vec<CheckRun>,
}

impl HttpGateway {
    async fn check_runs(&self, repo: &RepoRef, sha: &Sha) -> GatewayResult<Vec<CheckRun>> {
        let reply = self
            .send(
                Host::GitHub,
                Method::GET,
                &["repos", repo.owner(), repo.name(), "commits", sha.as_str(), "check-runs"],
                &[("per_page", "100")],
                None,
            )
            .await?;
        let mut runs = ok(reply, "listing check runs")?.json::<CheckRuns>()?.check_runs;
        runs.sort_by_key(|r| r.id);
        Ok(runs)
    }
}

#[async_trait]
impl ForgeGateway for HttpGateway {
    async fn get_pull_request(&self, pr: &PrRef) -> GatewayResult<PullRequest> {
        let data = self
            .query::<graphql::PullRequestQuery>(&graphql::PrVariables {
                owner: pr.repo.owner().to_string(),
                name: pr.repo.name().to_string(),
                number: pr.number,
            })
            .await?;
        let node = data
            .repository
            .and_then(|r| r.pull_request)
            .ok_or_else(|| GatewayError::NotFound(pr.to_string()))?;
        to_pull_request(&pr.repo, node)
    }

    async fn is_team_member(&self, org: &str, team: &str, login: &str) -> GatewayResult<bool> {
        let key = (org.to_string(), team.to_string(), login.to_string());
        if let Some((at, member)) = self.teams.lock().expect("team cache poisoned").get(&key) {
            if at.elapsed() < self.config.team_cache_ttl {
                return Ok(*member);
            }
        }
        let reply = self
            .gh(Method::GET, &["orgs", org, "teams", team, "memberships", login], None)
            .await?;
        let member = if reply.status == StatusCode::NOT_FOUND {
            // GitHub answers 404 both for non-members and for unknown teams.
            let team_reply = self.gh(Method::GET, &["orgs", org, "teams", team], None).await?;
            if team_reply.status == StatusCode::NOT_FOUND {
                return Err(GatewayError::UnknownTeam(format!("{org}/{team}")));
            }
            ok(team_reply, "reading team")?;
            false
        } else {
            #[derive(Deserialize)]
            struct Membership {
                state: String,
            }
            ok(reply, "reading team membership")?.json::<Membership>()?.state == "active"
        };
        self.teams
            .lock()
            .expect("team cache poisoned")
            .insert(key, (Instant::now(), member));
        Ok(member)
    }

    async fn list_open_prs_with_label(&self, repo: &RepoRef, label: &str) -> GatewayResult<Vec<PullRequest>> {
        let data = self
            .query::<graphql::OpenPullRequestsWithLabel>(&graphql::LabelVariables {
                owner: repo.owner().to_string(),
                name: repo.name().to_string(),
                label: label.to_string(),
            })
            .await?;
        let list = data.repository.ok_or_else(|| GatewayError::NotFound(repo.to_string()))?;
        list.pull_requests
            .nodes
            .into_iter()
            .map(|n| to_pull_request(repo, n))
            .collect()
    }

    async fn label_applied_since(&self, pr: &PrRef, label: &str) -> GatewayResult<Option<DateTime<Utc>>> {
        let data = self
            .query::<graphql::LabelTimeline>(&graphql::PrVariables {
                owner: pr.repo.owner().to_string(),
                name: pr.repo.name().to_string(),
                number: pr.number,
            })
            .await?;
        let timeline = data
            .repository
            .and_then(|r| r.pull_request)
            .ok_or_else(|| GatewayError::NotFound(pr.to_string()))?;
        Ok(timeline
            .timeline_items
            .nodes
            .into_iter()
            .filter(|e| e.label.as_ref().is_some_and(|l| l.name == label))
            .filter_map(|e| e.created_at)
            .max())
    }

    async fn bot_comments(&self, pr: &PrRef, marker: &str) -> GatewayResult<Vec<Comment>> {
        #[derive(Deserialize)]
        struct RawComment {
            id: u64,
            user: graphql::Login,
            body: String,
            created_at: DateTime<Utc>,
        }
        let n = pr.number.to_string();
        let mut out = Vec::new();
        for page in 1.. {
            let page = page.to_string();
            let reply = self
                .send(
                    Host::GitHub,
                    Method::GET,
                    &["repos", pr.repo.owner(), pr.repo.name(), "issues", &n, "comments"],
                    &[("per_page", "100"), ("page", &page)],
                    None,
                )
                .await?;
            let batch: Vec<RawComment> = ok(reply, "listing comments")?.json()?;
            let last = batch.len() < 100;
            out.extend(
                batch
                    .into_iter()
                    .filter(|c| c.user.login == self.config.bot_name && c.body.contains(marker))
                    .map(|c| Comment {
                        id: c.id,
                        author: c.user.login,
                        body: c.body,
                        created_at: c.created_at,
                        target: pr.clone(),
                    }),
            );
            if last {
                break;
            }
        }
        Ok(out)
    }

    async fn get_job_log(&self, ci_repo: &RepoRef, log: &LogRef) -> GatewayResult<String> {
        let reply = self.gl(Method::GET, ci_repo, &["jobs", &log.0, "trace"], &[], None).await?;
        Ok(ok(reply, "reading job log")?.body)
    }

    async fn list_board_cards(&self, repo: &RepoRef, board: &str) -> GatewayResult<Option<Vec<BoardCard>>> {
        Ok(self.board(repo, board).await?.map(|b| {
            b.columns
                .iter()
                .flat_map(|c| {
                    c.cards.iter().map(|(_, n)| BoardCard {
                        board: board.to_string(),
                        column: c.name.clone(),
                        pr: PrRef::new(repo.clone(), *n),
                    })
                })
                .collect()
        }))
    }

    async fn resolve_column(&self, _repo: &RepoRef, column_id: u64) -> GatewayResult<Option<(String, String)>> {
        #[derive(Deserialize)]
        struct ColumnInfo {
            name: String,
            project_url: String,
        }
        let id = column_id.to_string();
        let reply = self.gh(Method::GET, &["projects", "columns", &id], None).await?;
        if reply.status == StatusCode::NOT_FOUND {
            return Ok(None);
        }
        let column: ColumnInfo = ok(reply, "reading column")?.json()?;
        let project_id = trailing_number(&column.project_url)
            .ok_or_else(|| GatewayError::Protocol(format!("odd project URL {}", column.project_url)))?
            .to_string();
        let project: IdName = self.gh_get(&["projects", &project_id], "reading project").await?;
        Ok(Some((project.name, column.name)))
    }

    async fn get_milestone(&self, repo: &RepoRef, id: u64) -> GatewayResult<MilestoneRef> {
        #[derive(Deserialize)]
        struct M {
            number: u64,
            title: String,
            description: Option<String>,
        }
        let n = id.to_string();
        let m: M = self
            .gh_get(&["repos", repo.owner(), repo.name(), "milestones", &n], "reading milestone")
            .await?;
        Ok(MilestoneRef {
            id: m.number,
            title: m.title,
            description: m.description.unwrap_or_default(),
        })
    }

    async fn required_checks_status(&self, repo: &RepoRef, sha: &Sha) -> GatewayResult<ChecksRollup> {
        #[derive(Deserialize)]
        struct Combined {
            state: String,
            total_count: u64,
        }
        let combined: Combined = self
            .gh_get(&["repos", repo.owner(), repo.name(), "commits", sha.as_str(), "status"], "reading status")
            .await?;
        let runs = self.check_runs(repo, sha).await?;
        if combined.total_count == 0 && runs.is_empty() {
            return Ok(ChecksRollup::Pending);
        }
        let run_failed = runs.iter().any(|r| {
            matches!(
                r.conclusion.as_deref(),
                Some("failure" | "timed_out" | "cancelled" | "action_required")
            )
        });
        if run_failed || (combined.total_count > 0 && matches!(combined.state.as_str(), "failure" | "error")) {
            return Ok(ChecksRollup::Failure);
        }
        if runs.iter().any(|r| r.status != "completed") || (combined.total_count > 0 && combined.state == "pending") {
            return Ok(ChecksRollup::Pending);
        }
        Ok(ChecksRollup::Success)
    }

    async fn get_commit(&self, repo: &RepoRef, sha: &Sha) -> GatewayResult<Option<Commit>> {
        if self.is_ci_repo(repo) {
            #[derive(Deserialize)]
            struct GlCommit {
                id: String,
                parent_ids: Vec<String>,
                message: String,
            }
            let reply = self
                .gl(Method::GET, repo, &["repository", "commits", sha.as_str()], &[], None)
                .await?;
            if reply.status == StatusCode::NOT_FOUND {
                return Ok(None);
            }
            let c: GlCommit = ok(reply, "reading commit")?.json()?;
            return Ok(Some(Commit {
                sha: parse_sha(&c.id)?,
                parents: c.parent_ids.iter().map(|p| parse_sha(p)).collect::<GatewayResult<_>>()?,
                message: c.message,
                annotations: Vec::new(),
            }));
        }
        #[derive(Deserialize)]
        struct ShaOnly {
            sha: String,
        }
        #[derive(Deserialize)]
        struct Inner {
            message: String,
        }
        #[derive(Deserialize)]
        struct GhCommit {
            sha: String,
            parents: Vec<ShaOnly>,
            commit: Inner,
        }
        let reply = self
            .gh(Method::GET, &["repos", repo.owner(), repo.name(), "commits", sha.as_str()], None)
            .await?;
        if matches!(reply.status, StatusCode::NOT_FOUND | StatusCode::UNPROCESSABLE_ENTITY) {
            return Ok(None);
        }
        let c: GhCommit = ok(reply, "reading commit")?.json()?;
        Ok(Some(Commit {
            sha: parse_sha(&c.sha)?,
            parents: c.parents.iter().map(|p| parse_sha(&p.sha)).collect::<GatewayResult<_>>()?,
            message: c.commit.message,
            annotations: Vec::new(),
        }))
    }

    async fn check_reports(&self, repo: &RepoRef, sha: &Sha) -> GatewayResult<Vec<CheckReport>> {
        self.check_runs(repo, sha)
            .await?
            .into_iter()
            .filter(|r| r.status == "completed")
            .map(|r| {
                let conclusion = match r.conclusion.as_deref() {
                    Some("success") => CheckConclusion::Success,
                    Some("failure" | "timed_out" | "cancelled" | "action_required") => CheckConclusion::Failure,
                    _ => CheckConclusion::Neutral,
                };
                Ok(CheckReport::new(
                    r.name,
                    conclusion,
                    r.output.title.unwrap_or_default(),
                    r.output.summary.unwrap_or_default(),
                    parse_sha(&r.head_sha)?,
                ))
            })
            .collect()
    }

    async fn latest_pipeline_jobs(&self, ci_repo: &RepoRef, branch: &str) -> GatewayResult<Vec<CiJob>> {
        #[derive(Deserialize)]
        struct P {
            id: u64,
        }
        let reply = self
            .gl(
                Method::GET,
                ci_repo,
                &["pipelines"],
                &[("ref", branch), ("order_by", "id"), ("sort", "desc"), ("per_page", "1")],
                None,
            )
            .await?;
        let pipelines: Vec<P> = ok(reply, "listing pipelines")?.json()?;
        let Some(pipeline) = pipelines.first() else {
            return Ok(Vec::new());
        };
        #[derive(Deserialize)]
        struct JobCommit {
            id: String,
        }
        #[derive(Deserialize)]
        struct Job {
            id: u64,
            name: String,
            status: String,
            #[serde(default)]
            web_url: Option<String>,
            commit: JobCommit,
        }
        let pid = pipeline.id.to_string();
        let reply = self
            .gl(Method::GET, ci_repo, &["pipelines", &pid, "jobs"], &[("per_page", "100")], None)
            .await?;
        let mut jobs: Vec<Job> = ok(reply, "listing jobs")?.json()?;
        jobs.sort_by_key(|j| j.id);
        jobs.into_iter()
            .map(|j| {
                Ok(CiJob {
                    id: j.id,
                    pipeline_id: pipeline.id,
                    name: j.name,
                    status: job_status(&j.status),
                    log_ref: LogRef(j.id.to_string()),
                    artifacts: Vec::new(),
                    tested_sha: parse_sha(&j.commit.id)?,
                    web_url: j.web_url,
                })
            })
            .collect()
    }

    async fn execute(&self, action: &Action) -> GatewayResult<ActionOutcome> {
        if let Some(outcome) = self
            .applied
            .lock()
            .expect("idempotency cache poisoned")
            .get(&action.idempotency_key)
        {
            return Ok(outcome.clone());
        }
        let outcome = self.perform(&action.kind).await?;
        self.applied
            .lock()
            .expect("idempotency cache poisoned")
            .put(action.idempotency_key.clone(), outcome.clone());
        Ok(outcome)
    }
}
