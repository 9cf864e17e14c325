use std::collections::VecDeque;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};

use forgebot_core::engine::{DispatchReport, Engine, Registry};
use forgebot_core::model::{next_tick, Event, RepoRef};
use forgebot_core::workflows::reference_bot;
use forgebot_core::BotConfig;

use crate::script::{parse_script_lines, ScriptError, ScriptOp};
use crate::state::SimError;
use crate::SimForge;

/// How a duplicated delivery reaches the bot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Redelivery {
    /// The same engine sees the delivery twice.
    SameEngine,
    /// The bot restarted in between: a new engine with an empty dedup cache sees it again.
    FreshEngine,
}

#[derive(Debug, thiserror::Error)]
#[error("step {step}: {error}")]
pub struct RunnerError {
    pub step: usize,
    pub error: SimError,
}

type RegistryFactory = Arc<dyn Fn() -> Registry + Send + Sync>;

/// Drives a simulator and an engine through an event script. Webhooks caused by bot actions
/// are dispatched after the delivery that caused them, in order.
pub struct Runner {
    forge: Arc<SimForge>,
    config: Arc<BotConfig>,
    make_registry: RegistryFactory,
    engine: Engine,
    dispatched: Vec<Event>,
    reports: Vec<DispatchReport>,
    redeliver: Option<(usize, Redelivery)>,
}

impl Runner {
    /// A fresh simulator running the reference bot.
    pub fn new(config: Arc<BotConfig>, epoch: DateTime<Utc>) -> Self {
        let c = config.clone();
        Self::with_registry(config, epoch, Arc::new(move || reference_bot(c.clone())))
    }

    pub fn with_registry(config: Arc<BotConfig>, epoch: DateTime<Utc>, make_registry: RegistryFactory) -> Self {
        let forge = SimForge::new(&config.bot_name, epoch);
        for (repo, rc) in &config.repos {
            forge.register_mirror(rc.mirror.ci_repo.clone(), repo.clone(), &rc.mirror.branch_prefix);
        }
        Self {
            forge: Arc::new(forge),
            config,
            engine: Engine::new(make_registry()),
            make_registry,
            dispatched: Vec::new(),
            reports: Vec::new(),
            redeliver: None,
        }
    }

    pub fn forge(&self) -> &Arc<SimForge> {
        &self.forge
    }

    pub fn config(&self) -> &Arc<BotConfig> {
        &self.config
    }

    /// Every delivery dispatched so far, redeliveries excluded.
    pub fn dispatched(&self) -> &[Event] {
        &self.dispatched
    }

    pub fn reports(&self) -> &[DispatchReport] {
        &self.reports
    }

    /// Delivers the `index`-th dispatched event a second time, right after the first.
    pub fn redeliver(&mut self, index: usize, mode: Redelivery) {
        self.redeliver = Some((index, mode));
    }

    pub async fn run(&mut self, ops: &[ScriptOp]) -> Result<(), RunnerError> {
        for (i, op) in ops.iter().enumerate() {
            self.step(op).await.map_err(|error| RunnerError { step: i + 1, error })?;
        }
        Ok(())
    }

    pub async fn step(&mut self, op: &ScriptOp) -> Result<(), SimError> {
        match op {
            ScriptOp::AdvanceClock { days, hours, minutes } => {
                let delta = Duration::days(*days as i64) + Duration::hours(*hours as i64) + Duration::minutes(*minutes as i64);
                self.advance_clock(delta).await;
            }
            ScriptOp::Tick { repo } => {
                let at = self.forge.now();
                self.deliver(Event::tick(repo, at)).await;
            }
            ScriptOp::Event { event } => self.deliver(event.clone()).await,
            other => {
                for event in self.forge.apply_op(other)? {
                    self.deliver(event).await;
                }
            }
        }
        Ok(())
    }

    /// Moves the clock forward, dispatching each daily scan tick at its own time.
    pub async fn advance_clock(&mut self, delta: Duration) -> DateTime<Utc> {
        assert!(delta >= Duration::zero(), "the clock only moves forward");
        let target = self.forge.now() + delta;
        while let Some(at) = next_tick(self.forge.now(), self.config.scan_hour).filter(|t| *t <= target) {
            self.forge.set_clock(at);
            let repos: Vec<RepoRef> = self.config.repos.keys().cloned().collect();
            for repo in repos {
                self.deliver(Event::tick(&repo, at)).await;
            }
        }
        self.forge.set_clock(target);
        target
    }

    pub async fn deliver(&mut self, event: Event) {
        let mut queue = VecDeque::from([event]);
        while let Some(event) = queue.pop_front() {
            let report = self.engine.dispatch(&event, &*self.forge).await;
            self.reports.push(report);
            let index = self.dispatched.len();
            self.dispatched.push(event.clone());
            match self.redeliver {
                Some((i, Redelivery::SameEngine)) if i == index => {
                    let report = self.engine.dispatch(&event, &*self.forge).await;
                    self.reports.push(report);
                }
                Some((i, Redelivery::FreshEngine)) if i == index => {
                    let restarted = Engine::new((self.make_registry)());
                    let report = restarted.dispatch(&event, &*self.forge).await;
                    self.reports.push(report);
                }
                _ => {}
            }
            queue.extend(self.forge.take_events());
        }
    }
}

/// Clock start used when a script is replayed without an explicit epoch.
pub fn default_epoch() -> DateTime<Utc> {
    DateTime::from_timestamp(1_772_442_000, 0).expect("valid timestamp")
}

/// Runs a script on a fresh simulator and engine. Parse errors and ops the simulator
/// rejects are both reported with their line number.
pub async fn replay_script(config: Arc<BotConfig>, text: &str, epoch: DateTime<Utc>) -> Result<Runner, ScriptError> {
    let ops = parse_script_lines(text)?;
    let mut runner = Runner::new(config, epoch);
    for (line, op) in &ops {
        runner.step(op).await.map_err(|e| ScriptError {
            line: *line,
            message: e.to_string(),
        })?;
    }
    Ok(runner)
}
