//! Operator operations, run in-process by the CLI or behind the service's `/v1` endpoints.

use std::sync::Arc;

use chrono::{DateTime, Utc};

use forgebot_core::api::{ReplayReport, ScanReport};
use forgebot_core::engine::DispatchReport;
use forgebot_core::gateway::DryRunGateway;
use forgebot_core::model::{Event, EventPayload};
use forgebot_core::workflows::reference_bot;
use forgebot_core::{BotConfig, Engine, ForgeGateway};
use forgebot_sim::{format_action_log, replay_script, ScriptError};

/// One stale scan of every configured repository at `now`. In a dry run, actions are
/// recorded instead of sent; reads still hit the gateway.
pub async fn scan(config: Arc<BotConfig>, gateway: Arc<dyn ForgeGateway>, now: DateTime<Utc>, dry_run: bool) -> ScanReport {
    let engine = Engine::new(reference_bot(config.clone()));
    let dry = DryRunGateway::new(gateway.clone());
    let mut report = ScanReport {
        now,
        dry_run,
        actions: Vec::new(),
        errors: Vec::new(),
    };
    for repo in config.repos.keys() {
        let event = Event::new(
            format!("scan-{repo}-{}", now.format("%Y%m%dT%H%M%S")),
            now,
            EventPayload::ScheduledTick { repo: repo.clone(), at: now },
        );
        let dispatched: DispatchReport = if dry_run {
            engine.dispatch(&event, &dry).await
        } else {
            engine.dispatch(&event, &*gateway).await
        };
        report.actions.extend(dispatched.actions().cloned());
        report.errors.extend(
            dispatched
                .failures
                .iter()
                .map(|f| format!("{repo}: {}: {}", f.workflow, f.error)),
        );
        report.errors.extend(
            dispatched
                .executed
                .iter()
                .filter_map(|e| e.result.as_ref().err().map(|err| format!("{repo}: {}: {err}", e.action.kind))),
        );
    }
    report
}

/// Runs an event script on a fresh simulator and returns its action log.
pub async fn replay(config: Arc<BotConfig>, script: &str, epoch: DateTime<Utc>) -> Result<ReplayReport, ScriptError> {
    let runner = replay_script(config, script, epoch).await?;
    Ok(ReplayReport {
        log: format_action_log(&runner.forge().action_log()),
    })
}
