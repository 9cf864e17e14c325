//! Forge webhook payloads to [`Event`]s. Only the fields the workflows need are decoded, so
//! unrelated payload changes upstream do not break ingestion.

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use forgebot_core::model::{
    CiJob, ColumnLocator, Comment, Event, EventPayload, JobStatus, LogRef, PrRef, PushedCommit, RepoRef, Sha,
};
use forgebot_core::BotConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    GitHubLike,
    GitLabLike,
}

#[derive(Debug, Clone)]
pub struct Delivery {
    pub source: Source,
    pub delivery_id: String,
    pub event_name: String,
    pub signature_header: String,
    /// Exactly the bytes the signature covers.
    pub raw_body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Normalized {
    Event(Box<Event>),
    /// Acknowledged and ignored; the string says why.
    Unsupported(String),
}

#[derive(Debug, thiserror::Error)]
#[error("malformed {event} payload: {message}")]
pub struct MalformedPayload {
    pub event: String,
    pub message: String,
}

/// Maps a verified delivery to an event. GitLab CI events are attributed to the origin
/// repository whose mirror they belong to; pipelines of unconfigured projects are ignored.
pub fn normalize(
    delivery: &Delivery,
    config: &BotConfig,
    received_at: DateTime<Utc>,
) -> Result<Normalized, MalformedPayload> {
    let payload = match delivery.source {
        Source::GitHubLike => github(delivery)?,
        Source::GitLabLike => gitlab(delivery, config)?,
    };
    Ok(match payload {
        Ok(payload) => Normalized::Event(Box::new(Event::new(&delivery.delivery_id, received_at, payload))),
        Err(why) => Normalized::Unsupported(why),
    })
}

fn decode<T: DeserializeOwned>(delivery: &Delivery) -> Result<T, MalformedPayload> {
    serde_json::from_slice(&delivery.raw_body).map_err(|e| MalformedPayload {
        event: delivery.event_name.clone(),
        message: e.to_string(),
    })
}

fn malformed(delivery: &Delivery, message: impl Into<String>) -> MalformedPayload {
    MalformedPayload {
        event: delivery.event_name.clone(),
        message: message.into(),
    }
}

fn repo(delivery: &Delivery, full_name: &str) -> Result<RepoRef, MalformedPayload> {
    full_name.parse().map_err(|e: forgebot_core::ModelError| malformed(delivery, e.to_string()))
}

fn sha(delivery: &Delivery, s: &str) -> Result<Sha, MalformedPayload> {
    Sha::parse(s).map_err(|e| malformed(delivery, e.to_string()))
}

#[derive(Deserialize)]
struct Repository {
    full_name: String,
}

#[derive(Deserialize)]
struct User {
    login: String,
}

type Outcome = Result<Result<EventPayload, String>, MalformedPayload>;

fn github(d: &Delivery) -> Outcome {
    match d.event_name.as_str() {
        "pull_request" => {
            #[derive(Deserialize)]
            struct Head {
                sha: String,
            }
            #[derive(Deserialize)]
            struct Pr {
                number: u64,
                head: Head,
                #[serde(default)]
                merged: bool,
            }
            #[derive(Deserialize)]
            struct P {
                action: String,
                pull_request: Pr,
                repository: Repository,
            }
            let p: P = decode(d)?;
            let (repo, number) = (repo(d, &p.repository.full_name)?, p.pull_request.number);
            Ok(Ok(match p.action.as_str() {
                "opened" | "reopened" => EventPayload::PrOpened {
                    repo,
                    number,
                    head_sha: sha(d, &p.pull_request.head.sha)?,
                },
                "synchronize" => EventPayload::PrSynchronized {
                    repo,
                    number,
                    head_sha: sha(d, &p.pull_request.head.sha)?,
                },
                "closed" => EventPayload::PrClosed {
                    repo,
                    number,
                    merged: p.pull_request.merged,
                },
                other => return Ok(Err(format!("pull_request action {other}"))),
            }))
        }
        "issue_comment" => {
            #[derive(Deserialize)]
            struct Issue {
                number: u64,
                #[serde(default)]
                pull_request: Option<serde_json::Value>,
            }
            #[derive(Deserialize)]
            struct C {
                id: u64,
                user: User,
                body: String,
                created_at: DateTime<Utc>,
            }
            #[derive(Deserialize)]
            struct P {
                action: String,
                issue: Issue,
                comment: C,
                repository: Repository,
            }
            let p: P = decode(d)?;
            if p.action != "created" {
                return Ok(Err(format!("issue_comment action {}", p.action)));
            }
            if p.issue.pull_request.is_none() {
                return Ok(Err("comment on an issue".into()));
            }
            Ok(Ok(EventPayload::CommentCreated {
                comment: Comment {
                    id: p.comment.id,
                    author: p.comment.user.login,
                    body: p.comment.body,
                    created_at: p.comment.created_at,
                    target: PrRef::new(repo(d, &p.repository.full_name)?, p.issue.number),
                },
            }))
        }
        "push" => {
            #[derive(Deserialize)]
            struct C {
                id: String,
                message: String,
            }
            #[derive(Deserialize, Default)]
            struct Pusher {
                #[serde(default)]
                name: String,
            }
            #[derive(Deserialize)]
            struct P {
                #[serde(rename = "ref")]
                git_ref: String,
                after: String,
                #[serde(default)]
                deleted: bool,
                #[serde(default)]
                commits: Vec<C>,
                #[serde(default)]
                pusher: Pusher,
                repository: Repository,
            }
            let p: P = decode(d)?;
            let Some(branch) = p.git_ref.strip_prefix("refs/heads/") else {
                return Ok(Err(format!("push to {}", p.git_ref)));
            };
            if p.deleted {
                return Ok(Err(format!("deletion of {branch}")));
            }
            let commits = p
                .commits
                .iter()
                .map(|c| {
                    Ok(PushedCommit {
                        sha: sha(d, &c.id)?,
                        message: c.message.clone(),
                    })
                })
                .collect::<Result<_, MalformedPayload>>()?;
            Ok(Ok(EventPayload::PushToBranch {
                repo: repo(d, &p.repository.full_name)?,
                branch: branch.to_string(),
                after: sha(d, &p.after)?,
                commits,
                pusher: p.pusher.name,
            }))
        }
        "project_card" => {
            #[derive(Deserialize)]
            struct Card {
                column_id: u64,
                #[serde(default)]
                content_url: Option<String>,
            }
            #[derive(Deserialize)]
            struct P {
                action: String,
                project_card: Card,
                #[serde(default)]
                repository: Option<Repository>,
                sender: User,
            }
            let p: P = decode(d)?;
            if p.action != "deleted" {
                return Ok(Err(format!("project_card action {}", p.action)));
            }
            let Some(number) = p
                .project_card
                .content_url
                .as_deref()
                .and_then(|u| u.rsplit('/').next())
                .and_then(|n| n.parse().ok())
            else {
                return Ok(Err("card without an issue or PR".into()));
            };
            let Some(repository) = p.repository else {
                return Ok(Err("card on an organization project".into()));
            };
            Ok(Ok(EventPayload::CardRemoved {
                repo: repo(d, &repository.full_name)?,
                location: ColumnLocator::Id {
                    column_id: p.project_card.column_id,
                },
                number,
                actor: p.sender.login,
            }))
        }
        other => Ok(Err(format!("event {other}"))),
    }
}

fn job_status(s: &str) -> Option<JobStatus> {
    match s {
        "success" => Some(JobStatus::Success),
        "failed" => Some(JobStatus::Failed),
        "canceled" | "skipped" => Some(JobStatus::Canceled),
        _ => None,
    }
}

#[derive(Deserialize)]
struct Project {
    path_with_namespace: String,
    #[serde(default)]
    web_url: Option<String>,
}

fn gitlab(d: &Delivery, config: &BotConfig) -> Outcome {
    match d.event_name.as_str() {
        "Pipeline Hook" => {
            #[derive(Deserialize)]
            struct Attrs {
                id: u64,
                #[serde(rename = "ref")]
                git_ref: String,
                sha: String,
                status: String,
                #[serde(default)]
                url: Option<String>,
            }
            #[derive(Deserialize)]
            struct P {
                object_attributes: Attrs,
                project: Project,
            }
            let p: P = decode(d)?;
            let ci_repo = repo(d, &p.project.path_with_namespace)?;
            let Some(origin) = config.origin_of(&ci_repo) else {
                return Ok(Err(format!("pipeline of unconfigured project {ci_repo}")));
            };
            let Some(status) = job_status(&p.object_attributes.status) else {
                return Ok(Err(format!("pipeline status {}", p.object_attributes.status)));
            };
            let mirror = &config.repos[origin].mirror;
            Ok(Ok(EventPayload::PipelineCompleted {
                repo: origin.clone(),
                pr_number: mirror.pr_number(&p.object_attributes.git_ref),
                ci_repo,
                pipeline_id: p.object_attributes.id,
                branch: p.object_attributes.git_ref,
                tested_sha: sha(d, &p.object_attributes.sha)?,
                status,
                web_url: p.object_attributes.url,
            }))
        }
        "Job Hook" | "Build Hook" => {
            #[derive(Deserialize)]
            struct P {
                #[serde(rename = "ref")]
                git_ref: String,
                sha: String,
                build_id: u64,
                build_name: String,
                build_status: String,
                pipeline_id: u64,
                project: Project,
            }
            let p: P = decode(d)?;
            let ci_repo = repo(d, &p.project.path_with_namespace)?;
            let Some(origin) = config.origin_of(&ci_repo) else {
                return Ok(Err(format!("job of unconfigured project {ci_repo}")));
            };
            let Some(status) = job_status(&p.build_status) else {
                return Ok(Err(format!("job status {}", p.build_status)));
            };
            let mirror = &config.repos[origin].mirror;
            Ok(Ok(EventPayload::JobCompleted {
                repo: origin.clone(),
                pr_number: mirror.pr_number(&p.git_ref),
                ci_repo,
                branch: p.git_ref,
                job: CiJob {
                    id: p.build_id,
                    pipeline_id: p.pipeline_id,
                    name: p.build_name,
                    status,
                    log_ref: LogRef(p.build_id.to_string()),
                    artifacts: Vec::new(),
                    tested_sha: sha(d, &p.sha)?,
                    web_url: p.project.web_url.map(|u| format!("{u}/-/jobs/{}", p.build_id)),
                },
            }))
        }
        other => Ok(Err(format!("event {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn config() -> BotConfig {
        BotConfig::from_toml(
            r#"
bot_name = "coqbot"
[repos."coq/coq"]
mirror = { ci_repo = "coq/coq-ci" }
merge_policy = { merge_team = "merge-maintainers" }
"#,
        )
        .unwrap()
    }

    fn gh(event: &str, body: serde_json::Value) -> Delivery {
        Delivery {
            source: Source::GitHubLike,
            delivery_id: "d1".into(),
            event_name: event.into(),
            signature_header: String::new(),
            raw_body: serde_json::to_vec(&body).unwrap(),
        }
    }

    fn gl(event: &str, body: serde_json::Value) -> Delivery {
        Delivery {
            source: Source::GitLabLike,
            ..gh(event, body)
        }
    }

    fn event(d: &Delivery) -> EventPayload {
        match normalize(d, &config(), Utc::now()).unwrap() {
            Normalized::Event(e) => e.payload,
            other => panic!("{other:?}"),
        }
    }

    fn is_unsupported(d: &Delivery) -> bool {
        matches!(normalize(d, &config(), Utc::now()), Ok(Normalized::Unsupported(_)))
    }

    const SHA: &str = "cccccccccccccccccccccccccccccccccccccccc";

    fn pr(action: &str) -> serde_json::Value {
        json!({
            "action": action,
            "pull_request": { "number": 42, "head": { "sha": SHA }, "merged": action == "closed" },
            "repository": { "full_name": "coq/coq" },
        })
    }

    #[test]
    fn pull_request_actions() {
        assert!(matches!(event(&gh("pull_request", pr("opened"))), EventPayload::PrOpened { number: 42, .. }));
        assert!(matches!(event(&gh("pull_request", pr("synchronize"))), EventPayload::PrSynchronized { .. }));
        assert!(matches!(event(&gh("pull_request", pr("closed"))), EventPayload::PrClosed { merged: true, .. }));
        assert!(is_unsupported(&gh("pull_request", pr("labeled"))));
    }

    #[test]
    fn star_is_unsupported() {
        assert!(is_unsupported(&gh("watch", json!({ "action": "started" }))));
    }

    #[test]
    fn comment_carries_the_body() {
        let body = json!({
            "action": "created",
            "issue": { "number": 42, "pull_request": { "url": "x" } },
            "comment": { "id": 9, "user": { "login": "alice" }, "body": "@coqbot: merge now", "created_at": "2026-03-02T09:00:00Z" },
            "repository": { "full_name": "coq/coq" },
        });
        match event(&gh("issue_comment", body.clone())) {
            EventPayload::CommentCreated { comment } => {
                assert_eq!(comment.body, "@coqbot: merge now");
                assert_eq!(comment.author, "alice");
                assert_eq!(comment.target.number, 42);
            }
            other => panic!("{other:?}"),
        }
        let mut on_issue = body;
        on_issue["issue"].as_object_mut().unwrap().remove("pull_request");
        assert!(is_unsupported(&gh("issue_comment", on_issue)));
    }

    #[test]
    fn push_to_branch_and_tag() {
        let body = |r: &str| {
            json!({
                "ref": r, "after": SHA, "repository": { "full_name": "coq/coq" },
                "pusher": { "name": "ppedrot" },
                "commits": [{ "id": SHA, "message": "Merge PR #1: x" }],
            })
        };
        match event(&gh("push", body("refs/heads/v8.13"))) {
            EventPayload::PushToBranch { branch, commits, pusher, .. } => {
                assert_eq!(branch, "v8.13");
                assert_eq!(commits.len(), 1);
                assert_eq!(pusher, "ppedrot");
            }
            other => panic!("{other:?}"),
        }
        assert!(is_unsupported(&gh("push", body("refs/tags/V8.13.0"))));
    }

    #[test]
    fn card_deletion() {
        let body = json!({
            "action": "deleted",
            "project_card": { "column_id": 901, "content_url": "https://api.github.com/repos/coq/coq/issues/42" },
            "repository": { "full_name": "coq/coq" },
            "sender": { "login": "alice" },
        });
        assert_eq!(
            event(&gh("project_card", body)),
            EventPayload::CardRemoved {
                repo: "coq/coq".parse().unwrap(),
                location: ColumnLocator::Id { column_id: 901 },
                number: 42,
                actor: "alice".into(),
            }
        );
    }

    #[test]
    fn gitlab_pipeline_and_job() {
        let pipeline = json!({
            "object_attributes": { "id": 300, "ref": "pr-42", "sha": SHA, "status": "failed" },
            "project": { "path_with_namespace": "coq/coq-ci" },
        });
        match event(&gl("Pipeline Hook", pipeline.clone())) {
            EventPayload::PipelineCompleted { repo, pr_number, status, .. } => {
                assert_eq!(repo.to_string(), "coq/coq");
                assert_eq!(pr_number, Some(42));
                assert_eq!(status, JobStatus::Failed);
            }
            other => panic!("{other:?}"),
        }
        let mut running = pipeline.clone();
        running["object_attributes"]["status"] = json!("running");
        assert!(is_unsupported(&gl("Pipeline Hook", running)));
        let mut foreign = pipeline;
        foreign["project"]["path_with_namespace"] = json!("someone/else");
        assert!(is_unsupported(&gl("Pipeline Hook", foreign)));

        let job = json!({
            "ref": "pr-42", "sha": SHA, "build_id": 5001, "build_name": "test-suite:base",
            "build_status": "failed", "pipeline_id": 300,
            "project": { "path_with_namespace": "coq/coq-ci", "web_url": "https://gitlab.com/coq/coq-ci" },
        });
        match event(&gl("Job Hook", job)) {
            EventPayload::JobCompleted { job, .. } => {
                assert_eq!(job.log_ref, LogRef("5001".into()));
                assert_eq!(job.web_url.as_deref(), Some("https://gitlab.com/coq/coq-ci/-/jobs/5001"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_supported_payload_is_an_error() {
        assert!(normalize(&gh("pull_request", json!({ "action": "opened" })), &config(), Utc::now()).is_err());
        let mut d = gh("push", json!({}));
        d.raw_body = b"not json".to_vec();
        assert!(normalize(&d, &config(), Utc::now()).is_err());
    }
}
