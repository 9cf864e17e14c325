use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use forgebot_core::action::{Action, ActionKind, ActionOutcome};
use forgebot_core::conformance::{failures, run_suite, World};
use forgebot_core::gateway::ForgeGateway;
use forgebot_core::model::{PrRef, RepoRef};
use forgebot_core::GatewayError;
use forgebot_http::{HttpConfig, HttpGateway};
use forgebot_recorded::{load, Recording, RecordedServer};
use serde_json::json;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/recorded/conformance.json")
}

fn gateway(server: &RecordedServer, world: &World) -> HttpGateway {
    let mut config = HttpConfig::new(&world.bot_name, "gh-token", "gl-token");
    config.github_api = server.url("/github");
    config.gitlab_api = server.url("/gitlab");
    config.ci_repos.insert(world.ci_repo.clone());
    config.retry_base = Duration::from_millis(1);
    HttpGateway::new(config)
}

#[tokio::test]
async fn http_gateway_passes_conformance() {
    let world = World::standard();
    let server = RecordedServer::start(load(&fixture()).unwrap()).await.unwrap();
    let gw = gateway(&server, &world);
    let outcomes = run_suite(&gw, &world).await;
    assert!(outcomes.len() >= 20);
    assert_eq!(failures(&outcomes), Vec::<String>::new());

    let comment_posts = server
        .requests()
        .iter()
        .filter(|r| r.method == "POST" && r.path.ends_with("/issues/42/comments"))
        .count();
    assert_eq!(comment_posts, 1, "repeated idempotency key must not reach the forge");
}

#[tokio::test]
async fn mirror_push_uses_staging_branch_and_message() {
    let world = World::standard();
    let server = RecordedServer::start(load(&fixture()).unwrap()).await.unwrap();
    let gw = gateway(&server, &world);
    let pr = gw.get_pull_request(&world.pr_ref(world.pr)).await.unwrap();
    let outcome = gw
        .execute(&Action::new(
            "k",
            ActionKind::PushBranch {
                pr: pr.pr_ref(),
                target: world.mirror_target(),
            },
        ))
        .await
        .unwrap();
    assert_eq!(outcome, ActionOutcome::Pushed { sha: world.mirror_sha.clone() });
    let merge = server.requests().into_iter().find(|r| r.path.ends_with("/merges")).unwrap();
    let body: serde_json::Value = serde_json::from_str(&merge.body).unwrap();
    assert_eq!(body["base"], "pr-42");
    assert_eq!(
        body["commit_message"],
        format!(
            "[bot] CI merge of PR #42\n\nMerge {} into master ({}).",
            world.head_sha, world.base_sha
        )
    );
}

fn milestone_ok() -> Recording {
    Recording::new("GET", "/github/repos/o/r/milestones/1", 200).json(json!({"number": 1, "title": "m"}))
}

async fn milestone(recordings: Vec<Recording>, max_retries: u32) -> (Result<String, GatewayError>, usize) {
    let server = RecordedServer::start(recordings).await.unwrap();
    let mut config = HttpConfig::new("bot", "t", "t");
    config.github_api = server.url("/github");
    config.retry_base = Duration::from_millis(1);
    config.max_retries = max_retries;
    let gw = HttpGateway::new(config);
    let repo: RepoRef = "o/r".parse().unwrap();
    let result = gw.get_milestone(&repo, 1).await.map(|m| m.title);
    (result, server.requests().len())
}

#[tokio::test]
async fn throttled_requests_are_retried() {
    let throttled = Recording::new("GET", "/github/repos/o/r/milestones/1", 429).times(2);
    let (result, requests) = milestone(vec![throttled, milestone_ok()], 3).await;
    assert_eq!(result.unwrap(), "m");
    assert_eq!(requests, 3);
}

#[tokio::test]
async fn exhausted_rate_limit_is_transient() {
    let limited = Recording::new("GET", "/github/repos/o/r/milestones/1", 403).header("x-ratelimit-remaining", "0");
    let (result, requests) = milestone(vec![limited], 3).await;
    assert!(matches!(result, Err(GatewayError::Transient(_))), "{result:?}");
    assert_eq!(requests, 4);
}

#[tokio::test]
async fn status_codes_map_to_errors() {
    let cases = [
        (404, "not_found"),
        (401, "permission"),
        (403, "permission"),
        (422, "invalid"),
        (500, "transient"),
        (418, "protocol"),
    ];
    for (status, expected) in cases {
        let (result, _) = milestone(vec![Recording::new("GET", "/github/repos/o/r/milestones/1", status)], 0).await;
        let got = match result {
            Err(GatewayError::NotFound(_)) => "not_found",
            Err(GatewayError::PermissionDenied(_)) => "permission",
            Err(GatewayError::Invalid(_)) => "invalid",
            Err(GatewayError::Transient(_)) => "transient",
            Err(GatewayError::Protocol(_)) => "protocol",
            other => panic!("{status}: {other:?}"),
        };
        assert_eq!(got, expected, "HTTP {status}");
    }
    let garbage = Recording::new("GET", "/github/repos/o/r/milestones/1", 200).json(json!({"nope": true}));
    let (result, _) = milestone(vec![garbage], 0).await;
    assert!(matches!(result, Err(GatewayError::Protocol(_))));
}

#[tokio::test]
async fn unreachable_host_is_transient() {
    let mut config = HttpConfig::new("bot", "t", "t");
    config.github_api = "http://127.0.0.1:9".into();
    config.retry_base = Duration::from_millis(1);
    config.max_retries = 1;
    let gw = HttpGateway::new(config);
    let result = gw.get_milestone(&"o/r".parse().unwrap(), 1).await;
    assert!(matches!(result, Err(GatewayError::Transient(_))), "{result:?}");
}

#[tokio::test]
async fn in_flight_requests_are_bounded_per_host() {
    let slow = milestone_ok().delay(30);
    let server = RecordedServer::start(vec![slow]).await.unwrap();
    let mut config = HttpConfig::new("bot", "t", "t");
    config.github_api = server.url("/github");
    config.max_in_flight = 3;
    let gw = Arc::new(HttpGateway::new(config));
    let mut tasks = Vec::new();
    for _ in 0..12 {
        let gw = gw.clone();
        tasks.push(tokio::spawn(async move {
            gw.get_milestone(&"o/r".parse().unwrap(), 1).await.unwrap();
        }));
    }
    for t in tasks {
        t.await.unwrap();
    }
    assert_eq!(server.requests().len(), 12);
    assert!(server.peak_in_flight() <= 3, "peak {}", server.peak_in_flight());
}

#[tokio::test]
async fn missing_label_removal_is_no_change() {
    let server = RecordedServer::start(vec![Recording::new(
        "DELETE",
        "/github/repos/o/r/issues/5/labels/needs:%20rebase",
        404,
    )])
    .await
    .unwrap();
    let mut config = HttpConfig::new("bot", "t", "t");
    config.github_api = server.url("/github");
    let gw = HttpGateway::new(config);
    let outcome = gw
        .execute(&Action::new(
            "k",
            ActionKind::RemoveLabel {
                pr: PrRef::new("o/r".parse().unwrap(), 5),
                label: "needs: rebase".into(),
            },
        ))
        .await
        .unwrap();
    assert_eq!(outcome, ActionOutcome::NoChange);
}
