//! End-to-end acceptance checks. Each test prints one PASS/FAIL line with what it measured
//! against its pinned threshold, then asserts. The lines appear even without `--nocapture`.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::Duration as Days;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use forgebot_core::action::{Action, ActionKind, ActionOutcome};
use forgebot_core::conformance::{failures, run_suite, World};
use forgebot_core::model::{CheckConclusion, Event, EventPayload, JobStatus, PrRef, PrState, RepoRef, Sha};
use forgebot_core::workflows::lifecycle::{parse_commands, CommandKind};
use forgebot_core::{BotConfig, ForgeGateway};
use forgebot_http::{HttpConfig, HttpGateway};
use forgebot_recorded::{load, RecordedServer};
use forgebot_server::{ops, sign, verify_signature};
use forgebot_sim::{conformance_forge, default_epoch, parse_script, JobSpec, Redelivery, Runner, ScriptOp};

const REBASE: &str = "needs: rebase";

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn config() -> Arc<BotConfig> {
    Arc::new(BotConfig::load(fixtures().join("bot.toml")).unwrap())
}

fn repo() -> RepoRef {
    "coq/coq".parse().unwrap()
}

fn ci_repo() -> RepoRef {
    "coq/coq-ci".parse().unwrap()
}

/// Written to the stdout handle directly so the line survives libtest's output capture.
fn verdict(name: &str, ok: bool, detail: String) {
    let line = format!("{} {name}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(ok, "{name}: {detail}");
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed < limit
}

fn new_actions(runner: &Runner, seen: usize) -> Vec<(Action, ActionOutcome)> {
    runner.forge().bot_actions().split_off(seen)
}

#[tokio::test]
async fn figure_one_scenario() {
    let started = Instant::now();
    let script = std::fs::read_to_string(fixtures().join("figure1.jsonl")).unwrap();
    let mut runner = Runner::new(config(), default_epoch());
    runner.run(&parse_script(&script).unwrap()).await.unwrap();
    let elapsed = started.elapsed();

    let pr = PrRef::new(repo(), 13458);
    let notable: Vec<ActionKind> = runner
        .forge()
        .bot_actions()
        .into_iter()
        .map(|(a, _)| a.kind)
        .filter(|k| {
            matches!(
                k,
                ActionKind::PostComment { .. } | ActionKind::MergePr { .. } | ActionKind::CreateCard { .. } | ActionKind::MoveCard { .. }
            )
        })
        .collect();
    let expected = [
        "violation comment naming the milestone",
        "merge with the PR subject",
        "card created in Backport requested",
        "card moved to Shipped",
    ];
    let matched = notable.len() == 4
        && matches!(&notable[0], ActionKind::PostComment { pr: p, body } if *p == pr && body.contains("cannot merge") && body.contains("milestone"))
        && matches!(&notable[1], ActionKind::MergePr { pr: p, message } if *p == pr && message.lines().next() == Some("Merge PR #13458: Fix anomaly in the unifier"))
        && matches!(&notable[2], ActionKind::CreateCard { pr: p, column, .. } if *p == pr && column == "Backport requested")
        && matches!(&notable[3], ActionKind::MoveCard { pr: p, column, .. } if *p == pr && column == "Shipped");
    let limit = Duration::from_secs(1);
    verdict(
        "figure-1 scenario",
        matched && within(elapsed, limit),
        format!(
            "{} of {} expected actions in order ({:?}), {elapsed:?} (limit {limit:?})",
            if matched { expected.len() } else { 0 },
            expected.len(),
            notable.iter().map(|k| k.name()).collect::<Vec<_>>()
        ),
    );
}

async fn labeled_pr(config: Arc<BotConfig>) -> Runner {
    let mut runner = Runner::new(config, default_epoch());
    let script = std::fs::read_to_string(fixtures().join("stale_setup.jsonl")).unwrap();
    runner.run(&parse_script(&script).unwrap()).await.unwrap();
    runner
}

fn stale_kinds(actions: &[(Action, ActionOutcome)]) -> Vec<&'static str> {
    actions
        .iter()
        .filter_map(|(a, _)| match &a.kind {
            ActionKind::PostComment { body, .. } if body.contains("<!-- bot:stale-warning -->") => Some("warn"),
            ActionKind::ClosePr { .. } => Some("close"),
            _ => None,
        })
        .collect()
}

#[tokio::test]
async fn stale_timeline() {
    let started = Instant::now();
    let config = config();
    let runner = labeled_pr(config.clone()).await;
    let forge = runner.forge().clone();
    let gateway: Arc<dyn ForgeGateway> = forge.clone();
    let mut observed = Vec::new();
    for day in [29, 30, 59, 60] {
        let now = default_epoch() + Days::days(day);
        forge.set_clock(now);
        let report = ops::scan(config.clone(), gateway.clone(), now, false).await;
        let got = stale_kinds(&report.actions.iter().map(|a| (a.clone(), ActionOutcome::Applied)).collect::<Vec<_>>());
        observed.push((day, if got.is_empty() { "none".to_string() } else { got.join("+") }));
    }
    let expected: Vec<(i64, String)> = [(29, "none"), (30, "warn"), (59, "none"), (60, "close")]
        .into_iter()
        .map(|(d, k)| (d, k.to_string()))
        .collect();
    let timeline_ok = observed == expected;

    // Removing the label at day 45 and re-adding it at day 50 restarts the clock.
    let mut reset = labeled_pr(config.clone()).await;
    let mut first_close = None;
    let mut warnings = Vec::new();
    for day in 1..=115 {
        let seen = reset.forge().bot_actions().len();
        reset.advance_clock(Days::days(1)).await;
        if day == 45 || day == 50 {
            let label = REBASE.to_string();
            let op = if day == 45 {
                ScriptOp::RemoveLabel { repo: repo(), number: 100, label, actor: "bob".into() }
            } else {
                ScriptOp::AddLabel { repo: repo(), number: 100, label, actor: "bob".into() }
            };
            reset.step(&op).await.unwrap();
        }
        for kind in stale_kinds(&new_actions(&reset, seen)) {
            match kind {
                "warn" => warnings.push(day),
                _ => {
                    first_close.get_or_insert(day);
                }
            }
        }
    }
    // Ticks run at the scan hour, so a label added mid-morning is first due on the following day.
    let reset_ok = first_close.is_some_and(|d| d >= 80) && warnings.len() == 2 && warnings[1] >= 80;
    let elapsed = started.elapsed();
    let limit = Duration::from_secs(1);
    verdict(
        "stale timeline",
        timeline_ok && reset_ok && within(elapsed, limit),
        format!(
            "scans {observed:?}; after reset warnings on days {warnings:?}, first close on day {first_close:?} (must be >= 80); {elapsed:?} (limit {limit:?})"
        ),
    );
}

/// Random PR traffic. Tracks, independently of the simulator, which (base head, PR head)
/// pairs were declared conflicting, so each mirror attempt's outcome is known up front.
struct Traffic {
    rng: StdRng,
    runner: Runner,
    declared: BTreeSet<(Sha, Sha)>,
    open: Vec<u64>,
    next_number: u64,
    resyncs: u64,
    ops: Vec<ScriptOp>,
}

enum Step {
    PrEvent(u64),
    Pipeline(Sha),
    Other,
}

impl Traffic {
    async fn new(seed: u64) -> Self {
        let mut t = Self {
            rng: StdRng::seed_from_u64(seed),
            runner: Runner::new(config(), default_epoch()),
            declared: BTreeSet::new(),
            open: Vec::new(),
            next_number: 1,
            resyncs: 0,
            ops: Vec::new(),
        };
        for op in [
            ScriptOp::CreateRepo { repo: repo(), branches: vec!["master".into(), "v8.13".into()] },
            ScriptOp::AddTeamMember { org: "coq".into(), team: "merge-maintainers".into(), login: "alice".into() },
            ScriptOp::CreateMilestone { repo: repo(), title: "8.14+rc1".into(), description: String::new() },
        ] {
            t.apply(op).await;
        }
        t
    }

    async fn apply(&mut self, op: ScriptOp) {
        self.runner.step(&op).await.unwrap_or_else(|e| panic!("{op:?}: {e}"));
        self.ops.push(op);
    }

    fn heads(&self, number: u64) -> (Sha, Sha) {
        let state = self.runner.forge().state();
        let r = &state.repos[&repo()];
        (r.branches["master"].clone(), r.prs[&number].head_sha.clone())
    }

    fn mirror_head(&self, number: u64) -> Option<Sha> {
        let state = self.runner.forge().state();
        state.repos.get(&ci_repo())?.branches.get(&format!("pr-{number}")).cloned()
    }

    fn still_open(&mut self) {
        let state = self.runner.forge().state();
        let prs = &state.repos[&repo()].prs;
        self.open.retain(|n| prs[n].state == PrState::Open);
    }

    fn pick_open(&mut self) -> Option<u64> {
        self.still_open();
        if self.open.is_empty() {
            None
        } else {
            Some(self.open[self.rng.gen_range(0..self.open.len())])
        }
    }

    async fn resync(&mut self, number: u64) {
        let (_, head) = self.heads(number);
        self.resyncs += 1;
        let event = Event::new(
            format!("resync-{}", self.resyncs),
            self.runner.forge().now(),
            EventPayload::PrSynchronized { repo: repo(), number, head_sha: head },
        );
        self.apply(ScriptOp::Event { event }).await;
    }

    /// Open, update and conflict traffic plus pipelines on the mirror branches.
    async fn ci_step(&mut self) -> Step {
        let roll = self.rng.gen_range(0..100);
        let target = self.pick_open();
        match (roll, target) {
            (_, None) | (0..=19, _) if self.open.len() < 4 => {
                let number = self.next_number;
                self.next_number += 1;
                self.open.push(number);
                let op = ScriptOp::OpenPr {
                    repo: repo(),
                    number: Some(number),
                    title: format!("Change {number}"),
                    body: String::new(),
                    author: "bob".into(),
                    base: "master".into(),
                    draft: false,
                    labels: Vec::new(),
                    milestone: None,
                    assignees: Vec::new(),
                };
                self.apply(op).await;
                Step::PrEvent(number)
            }
            (0..=39, Some(n)) => {
                self.apply(ScriptOp::PushPr { repo: repo(), number: n, message: None }).await;
                Step::PrEvent(n)
            }
            (40..=59, Some(n)) => {
                self.declared.insert(self.heads(n));
                self.apply(ScriptOp::DeclareConflict { repo: repo(), number: n }).await;
                self.resync(n).await;
                Step::PrEvent(n)
            }
            (60..=69, Some(n)) => {
                let op = ScriptOp::PushBranch {
                    repo: repo(),
                    branch: "master".into(),
                    message: format!("Unrelated work {}", self.ops.len()),
                    pusher: "dave".into(),
                };
                self.apply(op).await;
                self.resync(n).await;
                Step::PrEvent(n)
            }
            (_, Some(n)) => match self.mirror_head(n) {
                Some(tested) => {
                    let jobs = (0..self.rng.gen_range(1..5))
                        .map(|j| {
                            let status = if self.rng.gen_bool(0.3) { JobStatus::Failed } else { JobStatus::Success };
                            JobSpec::new(format!("job-{j}"), status, "Error: something broke\n")
                        })
                        .collect();
                    self.apply(ScriptOp::CompletePipeline { ci_repo: ci_repo(), branch: format!("pr-{n}"), jobs }).await;
                    Step::Pipeline(tested)
                }
                None => Step::Other,
            },
            (_, None) => Step::Other,
        }
    }

    /// Everything in [`Self::ci_step`] plus commands, reviews, milestones, labels and time.
    async fn mixed_step(&mut self) {
        let Some(n) = self.pick_open().filter(|_| self.rng.gen_bool(0.6)) else {
            self.ci_step().await;
            return;
        };
        match self.rng.gen_range(0..6) {
            0 => {
                let op = ScriptOp::Comment { repo: repo(), number: n, author: "alice".into(), body: "@coqbot: merge now".into() };
                self.apply(op).await;
            }
            1 => {
                let op = ScriptOp::Review {
                    repo: repo(),
                    number: n,
                    reviewer: "carol".into(),
                    decision: forgebot_core::model::ReviewDecision::Approved,
                };
                self.apply(op).await;
            }
            2 => self.apply(ScriptOp::SetMilestone { repo: repo(), number: n, title: Some("8.14+rc1".into()) }).await,
            3 => {
                let label = REBASE.to_string();
                let has = self.runner.forge().state().repos[&repo()].prs[&n].labels.contains(&label);
                let actor = "bob".to_string();
                let op = if has {
                    ScriptOp::RemoveLabel { repo: repo(), number: n, label, actor }
                } else {
                    ScriptOp::AddLabel { repo: repo(), number: n, label, actor }
                };
                self.apply(op).await;
            }
            4 => {
                let days = self.rng.gen_range(1..40);
                self.apply(ScriptOp::AdvanceClock { days, hours: 0, minutes: 0 }).await;
            }
            _ => {
                let op = ScriptOp::Comment { repo: repo(), number: n, author: "erin".into(), body: "@coqbot: ci minimize".into() };
                self.apply(op).await;
            }
        }
    }
}

fn reported_target(kind: &ActionKind) -> Option<&Sha> {
    match kind {
        ActionKind::ReportStatus { status, .. } => Some(&status.target_sha),
        ActionKind::ReportCheck { report, .. } => Some(&report.target_sha),
        _ => None,
    }
}

#[tokio::test]
async fn ci_mapping_property() {
    const SEQUENCES: u64 = 200;
    let started = Instant::now();
    let (mut reports, mut pr_events, mut conflicts) = (0usize, 0usize, 0usize);
    let mut problems = Vec::new();
    for seed in 0..SEQUENCES {
        let mut t = Traffic::new(seed).await;
        let steps = t.rng.gen_range(4..16);
        for _ in 0..steps {
            let seen = t.runner.forge().bot_actions().len();
            let step = t.ci_step().await;
            let added = new_actions(&t.runner, seen);
            let state = t.runner.forge().state();
            match step {
                Step::PrEvent(n) => {
                    pr_events += 1;
                    let pr = &state.repos[&repo()].prs[&n];
                    let base = state.repos[&repo()].branches["master"].clone();
                    // The oracle: the last mirror attempt conflicted iff this pair was declared.
                    let conflicted = t.declared.contains(&(base, pr.head_sha.clone()));
                    conflicts += usize::from(conflicted);
                    if pr.labels.contains(REBASE) != conflicted {
                        problems.push(format!("seed {seed}: #{n} label {} but conflicted {conflicted}", pr.labels.contains(REBASE)));
                    }
                    for (a, _) in &added {
                        if let Some(target) = reported_target(&a.kind) {
                            reports += 1;
                            if *target != pr.head_sha {
                                problems.push(format!("seed {seed}: {} on {target}, head is {}", a.kind.name(), pr.head_sha));
                            }
                        }
                    }
                }
                Step::Pipeline(tested) => {
                    let expected = &state.commits[&tested].parents[1];
                    for (a, _) in &added {
                        if let Some(target) = reported_target(&a.kind) {
                            reports += 1;
                            if target != expected {
                                problems.push(format!("seed {seed}: {} on {target}, tested merge has {expected}", a.kind.name()));
                            }
                        }
                    }
                }
                Step::Other => {}
            }
        }
    }
    let elapsed = started.elapsed();
    let limit = Duration::from_secs(10);
    let ok = problems.is_empty() && reports > 0 && conflicts > 0 && within(elapsed, limit);
    verdict(
        "CI mapping property",
        ok,
        format!(
            "{SEQUENCES} sequences (min 200), {pr_events} PR events ({conflicts} conflicted), {reports} reports checked, {} mismatches {:?}, {elapsed:?} (limit {limit:?})",
            problems.len(),
            problems.iter().take(3).collect::<Vec<_>>()
        ),
    );
}

async fn run_ops(ops: &[ScriptOp], redeliver: Option<(usize, Redelivery)>) -> Runner {
    let mut runner = Runner::new(config(), default_epoch());
    if let Some((i, mode)) = redeliver {
        runner.redeliver(i, mode);
    }
    runner.run(ops).await.unwrap();
    runner
}

#[tokio::test]
async fn duplicate_delivery_property() {
    const SCRIPTS: u64 = 100;
    let started = Instant::now();
    let mut mismatches = Vec::new();
    let mut deliveries = 0;
    for seed in 0..SCRIPTS {
        let mut t = Traffic::new(10_000 + seed).await;
        let steps = t.rng.gen_range(6..24);
        for _ in 0..steps {
            t.mixed_step().await;
        }
        let reference = t.runner.forge().state().snapshot_json();
        let total = t.runner.dispatched().len();
        deliveries += total;
        let index = t.rng.gen_range(0..total);
        for mode in [Redelivery::SameEngine, Redelivery::FreshEngine] {
            let replayed = run_ops(&t.ops, Some((index, mode))).await;
            if replayed.forge().state().snapshot_json() != reference {
                mismatches.push(format!("seed {seed}: delivery {index} via {mode:?}"));
            }
        }
    }
    let elapsed = started.elapsed();
    let limit = Duration::from_secs(30);
    verdict(
        "duplicate delivery property",
        mismatches.is_empty() && within(elapsed, limit),
        format!(
            "{SCRIPTS} scripts (min 100), {deliveries} deliveries, 2 redelivery modes each, {} state differences {:?}, {elapsed:?} (limit {limit:?})",
            mismatches.len(),
            mismatches.iter().take(3).collect::<Vec<_>>()
        ),
    );
}

fn check_counts(actions: &[(Action, ActionOutcome)]) -> (usize, usize, usize) {
    let mut counts = (0, 0, 0);
    for (a, _) in actions {
        match &a.kind {
            ActionKind::ReportCheck { report, .. } if report.conclusion == CheckConclusion::Failure => counts.0 += 1,
            ActionKind::ReportCheck { report, .. } if report.conclusion == CheckConclusion::Success => counts.1 += 1,
            ActionKind::ReportStatus { .. } => counts.2 += 1,
            _ => {}
        }
    }
    counts
}

fn pipeline_jobs(failing: &[usize]) -> Vec<JobSpec> {
    (0..23)
        .map(|j| {
            if failing.contains(&j) {
                JobSpec::new(format!("job-{j:02}"), JobStatus::Failed, "make: *** [all] Error 1\n")
            } else {
                JobSpec::new(format!("job-{j:02}"), JobStatus::Success, "ok\n")
            }
        })
        .collect()
}

#[tokio::test]
async fn success_report_suppression() {
    let mut runner = Runner::new(config(), default_epoch());
    let setup = std::fs::read_to_string(fixtures().join("stale_setup.jsonl")).unwrap();
    runner.run(&parse_script(&setup).unwrap()[..2]).await.unwrap();
    let pipeline = |failing: &[usize]| ScriptOp::CompletePipeline {
        ci_repo: ci_repo(),
        branch: "pr-100".into(),
        jobs: pipeline_jobs(failing),
    };

    let seen = runner.forge().bot_actions().len();
    runner.step(&pipeline(&[4, 11, 19])).await.unwrap();
    let first = check_counts(&new_actions(&runner, seen));

    let seen = runner.forge().bot_actions().len();
    runner.step(&pipeline(&[4, 19])).await.unwrap();
    let rerun = check_counts(&new_actions(&runner, seen));

    verdict(
        "success-report suppression",
        first == (3, 0, 1) && rerun.1 == 1,
        format!(
            "20 passed + 3 failed gave {} failure, {} success, {} status reports (want 3, 0, 1); rerun with one flip added {} success reports (want 1)",
            first.0, first.1, first.2, rerun.1
        ),
    );
}

// HMAC-SHA256 of "hello" keyed with "key", computed with
// `printf hello | openssl dgst -sha256 -hmac key`.
const SIGNATURE_VECTOR: &str = "sha256=9307b3b915efb5171ff14d8cb55fbcc798c6c0ef1456d66ded1a6aa723a58b7b";

#[test]
fn signature_vector() {
    let accepted = verify_signature(b"hello", b"key", SIGNATURE_VECTOR) && sign(b"hello", b"key") == SIGNATURE_VECTOR;
    let mut rng = StdRng::seed_from_u64(7);
    let body = b"{\"action\":\"opened\",\"number\":13458}".to_vec();
    let secret = b"webhook secret";
    let header = sign(&body, secret);
    let mut rejected = 0;
    for i in 0..100 {
        let (mut b, mut h) = (body.clone(), header.clone().into_bytes());
        // Alternate between corrupting the payload and the signature itself.
        let target: &mut Vec<u8> = if i % 2 == 0 { &mut b } else { &mut h };
        let lo = if i % 2 == 0 { 0 } else { "sha256=".len() };
        let at = rng.gen_range(lo..target.len());
        let original = target[at];
        while target[at] == original {
            target[at] = if i % 2 == 0 { rng.gen() } else { b"0123456789abcdef"[rng.gen_range(0..16)] };
        }
        if !verify_signature(&b, secret, std::str::from_utf8(&h).unwrap()) {
            rejected += 1;
        }
    }
    verdict(
        "signature vector",
        accepted && rejected == 100,
        format!("vector accepted: {accepted}; {rejected}/100 single-byte corruptions rejected"),
    );
}

#[test]
fn command_parser_table() {
    use CommandKind::{CiMinimize, Help, MergeNow};
    let jobs = |names: &[&str]| CiMinimize(names.iter().map(|s| s.to_string()).collect());
    let table: Vec<(&str, Vec<CommandKind>)> = vec![
        ("@coqbot: merge now", vec![MergeNow]),
        ("@coqbot: MERGE Now", vec![MergeNow]),
        ("   @coqbot:   merge    now   ", vec![MergeNow]),
        ("\t@coqbot:\tmerge\tnow", vec![MergeNow]),
        ("@coqbot:merge now", vec![]),
        ("@coqbot merge now", vec![]),
        ("@CoqBot: merge now", vec![]),
        ("@coqbot2: merge now", vec![]),
        ("please @coqbot: merge now", vec![]),
        ("> @coqbot: merge now", vec![]),
        ("@coqbot:", vec![]),
        ("@coqbot:    ", vec![]),
        ("@coqbot: ci minimize", vec![jobs(&[])]),
        ("@coqbot: CI Minimize ci-fiat_crypto ci-UniMath", vec![jobs(&["ci-fiat_crypto", "ci-UniMath"])]),
        ("@coqbot: help", vec![Help]),
        ("@coqbot: merge later", vec![Help]),
        ("@coqbot: merge now please", vec![Help]),
        ("@coqbot: ci", vec![Help]),
        ("LGTM\n@coqbot: merge now\n@coqbot: ci minimize ci-bignums\n", vec![MergeNow, jobs(&["ci-bignums"])]),
        ("Thanks!\r\n@coqbot: help\r\n", vec![Help]),
        ("@coqbot: merge now @coqbot: help", vec![Help]),
        ("", vec![]),
    ];
    let wrong: Vec<String> = table
        .iter()
        .filter_map(|(body, want)| {
            let got = parse_commands(body, "coqbot");
            (got != *want).then(|| format!("{body:?} gave {got:?}"))
        })
        .collect();
    verdict(
        "command parser table",
        table.len() >= 15 && wrong.is_empty(),
        format!("{}/{} cases match (min 15) {wrong:?}", table.len() - wrong.len(), table.len()),
    );
}

#[tokio::test]
async fn gateway_conformance() {
    let world = World::standard();
    let sim = conformance_forge(&world);
    let sim_outcomes = run_suite(&sim, &world).await;

    let server = RecordedServer::start(load(&fixtures().join("recorded/conformance.json")).unwrap()).await.unwrap();
    let mut http = HttpConfig::new(&world.bot_name, "gh-token", "gl-token");
    http.github_api = server.url("/github");
    http.gitlab_api = server.url("/gitlab");
    http.ci_repos.insert(world.ci_repo.clone());
    http.retry_base = Duration::from_millis(1);
    let http_outcomes = run_suite(&HttpGateway::new(http), &world).await;

    let names = |o: &[forgebot_core::conformance::CheckOutcome]| o.iter().map(|o| o.capability).collect::<Vec<_>>();
    let (sim_failed, http_failed) = (failures(&sim_outcomes), failures(&http_outcomes));
    let same_cases = names(&sim_outcomes) == names(&http_outcomes);
    verdict(
        "gateway conformance",
        same_cases && sim_outcomes.len() >= 20 && sim_failed.is_empty() && http_failed.is_empty(),
        format!(
            "simulator {}/{} and HTTP {}/{} capability cases pass, same case list: {same_cases} {sim_failed:?} {http_failed:?}",
            sim_outcomes.len() - sim_failed.len(),
            sim_outcomes.len(),
            http_outcomes.len() - http_failed.len(),
            http_outcomes.len()
        ),
    );
}
