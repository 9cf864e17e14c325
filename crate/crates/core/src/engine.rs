//! Trigger-action core.
//!
//! A [`Workflow`] combines an event filter (event trigger), a guard phase that queries the
//! gateway (state triggers), and a deterministic planner that turns the event and the
//! gathered facts into a [`Plan`] of actions. The [`Engine`] dispatches events to registered
//! workflows, serializing work per [`SerializationKey`] and dropping redelivered events.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use lru::LruCache;
use serde::Serialize;
use tracing::{debug, warn};

use crate::action::{idempotency_key, Action, ActionKind, ActionOutcome};
use crate::error::{EngineError, GatewayError};
use crate::gateway::ForgeGateway;
use crate::model::{Event, EventPayload, RepoRef};

pub const DEFAULT_DEDUP_CAPACITY: usize = 10_000;

/// Execution condition of a plan step, relative to an earlier step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    Always,
    /// The step ran and produced a non-conflict outcome.
    Succeeded(usize),
    /// The step ran and hit a merge conflict.
    Conflicted(usize),
    /// The step ran and failed with anything other than a conflict.
    Failed(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedAction {
    pub kind: ActionKind,
    pub when: Condition,
}

/// Ordered actions. Steps are independent unless they carry a [`Condition`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Plan {
    steps: Vec<PlannedAction>,
}

impl Plan {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an unconditional step and returns its index.
    pub fn push(&mut self, kind: ActionKind) -> usize {
        self.push_when(kind, Condition::Always)
    }

    pub fn push_when(&mut self, kind: ActionKind, when: Condition) -> usize {
        if let Condition::Succeeded(i) | Condition::Conflicted(i) | Condition::Failed(i) = when {
            assert!(i < self.steps.len(), "plan step may only depend on an earlier step");
        }
        self.steps.push(PlannedAction { kind, when });
        self.steps.len() - 1
    }

    pub fn extend(&mut self, other: Plan) {
        let offset = self.steps.len();
        for mut step in other.steps {
            step.when = match step.when {
                Condition::Always => Condition::Always,
                Condition::Succeeded(i) => Condition::Succeeded(i + offset),
                Condition::Conflicted(i) => Condition::Conflicted(i + offset),
                Condition::Failed(i) => Condition::Failed(i + offset),
            };
            self.steps.push(step);
        }
    }

    pub fn steps(&self) -> &[PlannedAction] {
        &self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }
}

/// Why the guard phase of a workflow did not produce facts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuardError {
    /// A state trigger declined: the workflow does not apply.
    Refused(String),
    /// A query failed. The workflow is skipped and the failure recorded.
    Gateway(GatewayError),
}

impl From<GatewayError> for GuardError {
    fn from(e: GatewayError) -> Self {
        GuardError::Gateway(e)
    }
}

pub type GuardResult<T> = Result<T, GuardError>;

#[async_trait]
pub trait Workflow: Send + Sync + 'static {
    type Facts: Send + Sync;

    fn name(&self) -> &str;

    fn accepts(&self, event: &Event) -> bool;

    /// Evaluates the state-trigger guards in order.
    async fn gather(&self, event: &Event, gateway: &dyn ForgeGateway) -> GuardResult<Self::Facts>;

    /// Must be a pure function of its inputs.
    fn plan(&self, event: &Event, facts: &Self::Facts) -> Plan;
}

#[async_trait]
trait ErasedWorkflow: Send + Sync {
    fn name(&self) -> &str;
    fn accepts(&self, event: &Event) -> bool;
    async fn prepare(&self, event: &Event, gateway: &dyn ForgeGateway) -> GuardResult<Plan>;
}

#[async_trait]
impl<W: Workflow> ErasedWorkflow for W {
    fn name(&self) -> &str {
        Workflow::name(self)
    }

    fn accepts(&self, event: &Event) -> bool {
        Workflow::accepts(self, event)
    }

    async fn prepare(&self, event: &Event, gateway: &dyn ForgeGateway) -> GuardResult<Plan> {
        let facts = self.gather(event, gateway).await?;
        Ok(self.plan(event, &facts))
    }
}

/// Ordered set of uniquely named workflows.
#[derive(Default)]
pub struct Registry {
    workflows: Vec<Box<dyn ErasedWorkflow>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register<W: Workflow>(&mut self, workflow: W) -> Result<&mut Self, EngineError> {
        if self.workflows.iter().any(|w| w.name() == Workflow::name(&workflow)) {
            return Err(EngineError::DuplicateWorkflow(Workflow::name(&workflow).to_string()));
        }
        self.workflows.push(Box::new(workflow));
        Ok(self)
    }

    pub fn names(&self) -> Vec<&str> {
        self.workflows.iter().map(|w| w.name()).collect()
    }

    pub fn len(&self) -> usize {
        self.workflows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.workflows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Scope {
    Pr(u64),
    Branch(String),
    RepoWide,
}

/// Events with equal keys never have their actions interleaved.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SerializationKey {
    pub repo: RepoRef,
    pub scope: Scope,
}

impl SerializationKey {
    pub fn for_event(event: &Event) -> Self {
        let scope = match &event.payload {
            EventPayload::PrOpened { number, .. }
            | EventPayload::PrSynchronized { number, .. }
            | EventPayload::PrClosed { number, .. } => Scope::Pr(*number),
            EventPayload::CommentCreated { comment } => Scope::Pr(comment.target.number),
            EventPayload::PipelineCompleted { pr_number, branch, .. }
            | EventPayload::JobCompleted { pr_number, branch, .. } => match pr_number {
                Some(n) => Scope::Pr(*n),
                None => Scope::Branch(branch.clone()),
            },
            EventPayload::PushToBranch { branch, .. } => Scope::Branch(branch.clone()),
            EventPayload::CardRemoved { .. } | EventPayload::ScheduledTick { .. } => Scope::RepoWide,
        };
        SerializationKey {
            repo: event.repo().clone(),
            scope,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutedAction {
    pub workflow: String,
    pub action: Action,
    pub result: Result<ActionOutcome, GatewayError>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkflowFailure {
    pub workflow: String,
    pub error: GatewayError,
    /// Whether the failure happened while evaluating guards (nothing executed).
    pub during_guards: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DispatchReport {
    pub duplicate: bool,
    pub executed: Vec<ExecutedAction>,
    pub failures: Vec<WorkflowFailure>,
    pub refusals: Vec<(String, String)>,
}

impl DispatchReport {
    pub fn actions(&self) -> impl Iterator<Item = &Action> {
        self.executed.iter().map(|e| &e.action)
    }
}

pub struct Engine {
    registry: Registry,
    seen: Mutex<LruCache<String, ()>>,
    locks: Mutex<HashMap<SerializationKey, Arc<tokio::sync::Mutex<()>>>>,
}

impl Engine {
    pub fn new(registry: Registry) -> Self {
        Self::with_dedup_capacity(registry, DEFAULT_DEDUP_CAPACITY)
    }

    pub fn with_dedup_capacity(registry: Registry, capacity: usize) -> Self {
        let capacity = NonZeroUsize::new(capacity).unwrap_or(NonZeroUsize::MIN);
        Self {
            registry,
            seen: Mutex::new(LruCache::new(capacity)),
            locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    /// Runs every accepting workflow, in registration order, for one event.
    pub async fn dispatch(&self, event: &Event, gateway: &dyn ForgeGateway) -> DispatchReport {
        if !self.mark_seen(&event.delivery_id) {
            debug!(delivery = %event.delivery_id, "dropping redelivered event");
            return DispatchReport {
                duplicate: true,
                ..DispatchReport::default()
            };
        }

        let key = SerializationKey::for_event(event);
        let lock = self.key_lock(&key);
        let report = {
            let _guard = lock.lock().await;
            self.run(event, gateway).await
        };
        drop(lock);
        self.release_key(&key);

        // A transient guard failure means the workflow never ran; let a redelivery retry it.
        if report
            .failures
            .iter()
            .any(|f| f.during_guards && f.error.is_transient())
        {
            self.seen.lock().expect("dedup cache poisoned").pop(&event.delivery_id);
        }
        report
    }

    async fn run(&self, event: &Event, gateway: &dyn ForgeGateway) -> DispatchReport {
        let mut report = DispatchReport::default();
        for workflow in self.registry.workflows.iter().filter(|w| w.accepts(event)) {
            let name = workflow.name().to_string();
            let plan = match workflow.prepare(event, gateway).await {
                Ok(plan) => plan,
                Err(GuardError::Refused(reason)) => {
                    debug!(workflow = %name, %reason, "guard refused");
                    report.refusals.push((name, reason));
                    continue;
                }
                Err(GuardError::Gateway(error)) => {
                    warn!(workflow = %name, %error, "guard query failed, skipping workflow");
                    report.failures.push(WorkflowFailure {
                        workflow: name,
                        error,
                        during_guards: true,
                    });
                    continue;
                }
            };
            self.execute_plan(&name, event, plan, gateway, &mut report).await;
        }
        report
    }

    async fn execute_plan(
        &self,
        workflow: &str,
        event: &Event,
        plan: Plan,
        gateway: &dyn ForgeGateway,
        report: &mut DispatchReport,
    ) {
        let mut results: Vec<Option<Result<ActionOutcome, GatewayError>>> = Vec::with_capacity(plan.len());
        for (index, step) in plan.steps.into_iter().enumerate() {
            if !condition_holds(step.when, &results) {
                results.push(None);
                continue;
            }
            let action = Action::new(idempotency_key(workflow, &event.delivery_id, index), step.kind);
            let result = gateway.execute(&action).await;
            if let Err(error) = &result {
                warn!(workflow, action = action.kind.name(), %error, "action failed");
                report.failures.push(WorkflowFailure {
                    workflow: workflow.to_string(),
                    error: error.clone(),
                    during_guards: false,
                });
            }
            results.push(Some(result.clone()));
            report.executed.push(ExecutedAction {
                workflow: workflow.to_string(),
                action,
                result,
            });
        }
    }

    /// Returns false when the delivery was already seen.
    fn mark_seen(&self, delivery_id: &str) -> bool {
        let mut seen = self.seen.lock().expect("dedup cache poisoned");
        if seen.contains(delivery_id) {
            seen.promote(delivery_id);
            false
        } else {
            seen.put(delivery_id.to_string(), ());
            true
        }
    }

    fn key_lock(&self, key: &SerializationKey) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.locks.lock().expect("key locks poisoned");
        locks.entry(key.clone()).or_default().clone()
    }

    fn release_key(&self, key: &SerializationKey) {
        let mut locks = self.locks.lock().expect("key locks poisoned");
        if let Some(lock) = locks.get(key) {
            if Arc::strong_count(lock) == 1 {
                locks.remove(key);
            }
        }
    }
}

fn condition_holds(when: Condition, results: &[Option<Result<ActionOutcome, GatewayError>>]) -> bool {
    let is_conflict = |r: &Result<ActionOutcome, GatewayError>| {
        matches!(r, Ok(ActionOutcome::Conflict) | Err(GatewayError::MergeConflict))
    };
    match when {
        Condition::Always => true,
        Condition::Succeeded(i) => matches!(&results[i], Some(r @ Ok(_)) if !is_conflict(r)),
        Condition::Conflicted(i) => matches!(&results[i], Some(r) if is_conflict(r)),
        Condition::Failed(i) => matches!(&results[i], Some(r @ Err(_)) if !is_conflict(r)),
    }
}
