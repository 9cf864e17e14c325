use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration as StdDuration;

use async_trait::async_trait;
use chrono::{DateTime, TimeZone, Utc};
use forgebot_core::action::{Action, ActionKind, ActionOutcome};
use forgebot_core::engine::{Condition, Engine, GuardError, GuardResult, Plan, Registry, Workflow};
use forgebot_core::error::{EngineError, GatewayError};
use forgebot_core::gateway::{ForgeGateway, GatewayResult};
use forgebot_core::model::*;

/// Gateway that only executes actions, recording when each one starts and ends.
#[derive(Default)]
struct Recorder {
    trace: Mutex<Vec<String>>,
    delay_ms: u64,
    fail_keys_containing: Option<&'static str>,
}

#[async_trait]
impl ForgeGateway for Recorder {
    async fn get_pull_request(&self, pr: &PrRef) -> GatewayResult<PullRequest> {
        Err(GatewayError::NotFound(pr.to_string()))
    }
    async fn is_team_member(&self, _: &str, team: &str, _: &str) -> GatewayResult<bool> {
        Err(GatewayError::UnknownTeam(team.into()))
    }
    async fn list_open_prs_with_label(&self, _: &RepoRef, _: &str) -> GatewayResult<Vec<PullRequest>> {
        Ok(Vec::new())
    }
    async fn label_applied_since(&self, _: &PrRef, _: &str) -> GatewayResult<Option<DateTime<Utc>>> {
        Ok(None)
    }
    async fn bot_comments(&self, _: &PrRef, _: &str) -> GatewayResult<Vec<Comment>> {
        Ok(Vec::new())
    }
    async fn get_job_log(&self, _: &RepoRef, log: &LogRef) -> GatewayResult<String> {
        Err(GatewayError::NotFound(log.0.clone()))
    }
    async fn list_board_cards(&self, _: &RepoRef, _: &str) -> GatewayResult<Option<Vec<BoardCard>>> {
        Ok(None)
    }
    async fn resolve_column(&self, _: &RepoRef, _: u64) -> GatewayResult<Option<(String, String)>> {
        Ok(None)
    }
    async fn get_milestone(&self, _: &RepoRef, id: u64) -> GatewayResult<MilestoneRef> {
        Err(GatewayError::NotFound(id.to_string()))
    }
    async fn required_checks_status(&self, _: &RepoRef, _: &Sha) -> GatewayResult<ChecksRollup> {
        Ok(ChecksRollup::Pending)
    }
    async fn get_commit(&self, _: &RepoRef, _: &Sha) -> GatewayResult<Option<Commit>> {
        Ok(None)
    }
    async fn check_reports(&self, _: &RepoRef, _: &Sha) -> GatewayResult<Vec<CheckReport>> {
        Ok(Vec::new())
    }
    async fn latest_pipeline_jobs(&self, _: &RepoRef, _: &str) -> GatewayResult<Vec<CiJob>> {
        Ok(Vec::new())
    }
    async fn execute(&self, action: &Action) -> GatewayResult<ActionOutcome> {
        self.trace.lock().unwrap().push(format!("start {}", action.idempotency_key));
        tokio::time::sleep(StdDuration::from_millis(self.delay_ms)).await;
        self.trace.lock().unwrap().push(format!("end {}", action.idempotency_key));
        if self.fail_keys_containing.is_some_and(|k| action.idempotency_key.contains(k)) {
            return Err(GatewayError::PermissionDenied("nope".into()));
        }
        Ok(match &action.kind {
            ActionKind::MergePr { .. } => ActionOutcome::Conflict,
            _ => ActionOutcome::Applied,
        })
    }
}

fn repo() -> RepoRef {
    "o/r".parse().unwrap()
}

fn sha() -> Sha {
    Sha::parse(&"a".repeat(40)).unwrap()
}

fn opened(delivery: &str, number: u64) -> Event {
    Event::new(
        delivery,
        Utc.with_ymd_and_hms(2026, 1, 1, 0, 0, 0).unwrap(),
        EventPayload::PrOpened {
            repo: repo(),
            number,
            head_sha: sha(),
        },
    )
}

/// Comments twice on every opened PR. Its guard fails transiently while `fail_guards` > 0.
struct Echo {
    name: &'static str,
    fail_guards: Arc<AtomicUsize>,
}

impl Echo {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            fail_guards: Arc::new(AtomicUsize::new(0)),
        }
    }
}

#[async_trait]
impl Workflow for Echo {
    type Facts = u64;

    fn name(&self) -> &str {
        self.name
    }

    fn accepts(&self, event: &Event) -> bool {
        matches!(event.payload, EventPayload::PrOpened { .. })
    }

    async fn gather(&self, event: &Event, _: &dyn ForgeGateway) -> GuardResult<u64> {
        let pending = self.fail_guards.load(Ordering::SeqCst);
        if pending > 0 {
            self.fail_guards.store(pending - 1, Ordering::SeqCst);
            return Err(GuardError::Gateway(GatewayError::Transient("timeout".into())));
        }
        match event.payload {
            EventPayload::PrOpened { number, .. } => Ok(number),
            _ => Err(GuardError::Refused("not a PR event".into())),
        }
    }

    fn plan(&self, _: &Event, number: &u64) -> Plan {
        let pr = PrRef::new(repo(), *number);
        let mut plan = Plan::new();
        for body in ["one", "two"] {
            plan.push(ActionKind::PostComment {
                pr: pr.clone(),
                body: body.into(),
            });
        }
        plan
    }
}

/// Merge followed by conditional follow-ups.
struct Conditional;

#[async_trait]
impl Workflow for Conditional {
    type Facts = ();

    fn name(&self) -> &str {
        "conditional"
    }

    fn accepts(&self, event: &Event) -> bool {
        matches!(event.payload, EventPayload::PrOpened { .. })
    }

    async fn gather(&self, _: &Event, _: &dyn ForgeGateway) -> GuardResult<()> {
        Ok(())
    }

    fn plan(&self, _: &Event, _: &()) -> Plan {
        let pr = PrRef::new(repo(), 1);
        let mut plan = Plan::new();
        let merge = plan.push(ActionKind::MergePr {
            pr: pr.clone(),
            message: "m".into(),
        });
        let label = |l: &str| ActionKind::AddLabel {
            pr: pr.clone(),
            label: l.into(),
        };
        plan.push_when(label("succeeded"), Condition::Succeeded(merge));
        plan.push_when(label("conflicted"), Condition::Conflicted(merge));
        plan.push_when(label("failed"), Condition::Failed(merge));
        plan
    }
}

#[test]
fn duplicate_workflow_names_are_rejected() {
    let mut registry = Registry::new();
    registry.register(Echo::new("echo")).unwrap();
    let err = registry.register(Echo::new("echo")).err().unwrap();
    assert!(matches!(err, EngineError::DuplicateWorkflow(name) if name == "echo"));
    assert_eq!(registry.len(), 1);
}

#[tokio::test]
async fn empty_registry_does_nothing() {
    let engine = Engine::new(Registry::new());
    let gateway = Recorder::default();
    let report = engine.dispatch(&opened("d1", 1), &gateway).await;
    assert!(!report.duplicate);
    assert_eq!(report.actions().count(), 0);
    assert!(gateway.trace.lock().unwrap().is_empty());
}

#[tokio::test]
async fn workflows_run_in_registration_order_with_keys() {
    let mut registry = Registry::new();
    registry.register(Echo::new("b")).unwrap().register(Echo::new("a")).unwrap();
    let engine = Engine::new(registry);
    let report = engine.dispatch(&opened("d1", 1), &Recorder::default()).await;
    let keys: Vec<&str> = report.actions().map(|a| a.idempotency_key.as_str()).collect();
    assert_eq!(keys, ["b/d1/0", "b/d1/1", "a/d1/0", "a/d1/1"]);
}

#[tokio::test]
async fn repeated_delivery_is_dropped() {
    let mut registry = Registry::new();
    registry.register(Echo::new("echo")).unwrap();
    let engine = Engine::new(registry);
    let gateway = Recorder::default();
    assert_eq!(engine.dispatch(&opened("d1", 1), &gateway).await.actions().count(), 2);
    let again = engine.dispatch(&opened("d1", 1), &gateway).await;
    assert!(again.duplicate);
    assert_eq!(again.actions().count(), 0);
    assert_eq!(gateway.trace.lock().unwrap().len(), 4);
}

#[tokio::test]
async fn dedup_cache_is_bounded() {
    let mut registry = Registry::new();
    registry.register(Echo::new("echo")).unwrap();
    let engine = Engine::with_dedup_capacity(registry, 2);
    let gateway = Recorder::default();
    for d in ["d1", "d2", "d3"] {
        engine.dispatch(&opened(d, 1), &gateway).await;
    }
    // d1 was evicted, so it is processed again; d3 is still remembered.
    assert!(!engine.dispatch(&opened("d1", 1), &gateway).await.duplicate);
    assert!(engine.dispatch(&opened("d3", 1), &gateway).await.duplicate);
}

#[tokio::test]
async fn transient_guard_failure_allows_redelivery() {
    let echo = Echo::new("echo");
    echo.fail_guards.store(1, Ordering::SeqCst);
    let mut registry = Registry::new();
    registry.register(echo).unwrap();
    let engine = Engine::new(registry);
    let gateway = Recorder::default();
    let first = engine.dispatch(&opened("d1", 1), &gateway).await;
    assert_eq!(first.failures.len(), 1);
    assert!(first.failures[0].during_guards);
    let retry = engine.dispatch(&opened("d1", 1), &gateway).await;
    assert!(!retry.duplicate);
    assert_eq!(retry.actions().count(), 2);
}

#[tokio::test]
async fn conditions_follow_the_outcome() {
    let mut registry = Registry::new();
    registry.register(Conditional).unwrap();
    let engine = Engine::new(registry);
    let report = engine.dispatch(&opened("d1", 1), &Recorder::default()).await;
    let labels: Vec<&str> = report
        .actions()
        .filter_map(|a| match &a.kind {
            ActionKind::AddLabel { label, .. } => Some(label.as_str()),
            _ => None,
        })
        .collect();
    assert_eq!(labels, ["conflicted"]);
}

#[tokio::test]
async fn failed_action_does_not_stop_the_plan() {
    let mut registry = Registry::new();
    registry.register(Echo::new("echo")).unwrap();
    let engine = Engine::new(registry);
    let gateway = Recorder {
        fail_keys_containing: Some("/0"),
        ..Recorder::default()
    };
    let report = engine.dispatch(&opened("d1", 1), &gateway).await;
    let results: Vec<bool> = report.executed.iter().map(|e| e.result.is_ok()).collect();
    assert_eq!(results, [false, true]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn same_pr_is_serialized() {
    let mut registry = Registry::new();
    registry.register(Echo::new("echo")).unwrap();
    let engine = Arc::new(Engine::new(registry));
    let gateway = Arc::new(Recorder {
        delay_ms: 20,
        ..Recorder::default()
    });
    let mut handles = Vec::new();
    for d in ["d1", "d2", "d3"] {
        let (engine, gateway) = (engine.clone(), gateway.clone());
        handles.push(tokio::spawn(async move {
            engine.dispatch(&opened(d, 7), &*gateway).await;
        }));
    }
    for h in handles {
        h.await.unwrap();
    }
    let trace = gateway.trace.lock().unwrap().clone();
    assert_eq!(trace.len(), 12);
    // Each delivery's actions form one contiguous block.
    for block in trace.chunks(4) {
        let delivery = block[0].split('/').nth(1).unwrap();
        assert!(block.iter().all(|t| t.split('/').nth(1) == Some(delivery)), "{trace:#?}");
    }
}
