//! The bot as a service: webhook ingress on `POST /webhook`, a dispatch loop feeding the
//! engine, a daily scheduler emitting scan ticks, and operator endpoints under `/v1`.
//!
//! Deliveries are acknowledged once queued. The queue is in memory and bounded; when it is
//! full the webhook answers 503 and the forge redelivers later.

pub mod normalize;
pub mod ops;
pub mod signature;

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;
use tokio::sync::mpsc;

use forgebot_core::api::{ApiError, ReplayRequest, ScanRequest};
use forgebot_core::model::{next_tick, Event};
use forgebot_core::workflows::reference_bot;
use forgebot_core::{BotConfig, Engine, ForgeGateway};

pub use normalize::{normalize, Delivery, MalformedPayload, Normalized, Source};
pub use signature::{sign, verify_signature, verify_token};

pub const DEFAULT_QUEUE_CAPACITY: usize = 1024;

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

/// Everything the handlers, the dispatch loop and the scheduler share.
pub struct Service {
    pub config: Arc<BotConfig>,
    pub gateway: Arc<dyn ForgeGateway>,
    pub engine: Engine,
    /// Webhook secret; also the bearer token of the `/v1` endpoints.
    pub secret: Vec<u8>,
    pub clock: Clock,
}

impl Service {
    pub fn new(config: Arc<BotConfig>, gateway: Arc<dyn ForgeGateway>, secret: Vec<u8>) -> Self {
        Self {
            engine: Engine::new(reference_bot(config.clone())),
            config,
            gateway,
            secret,
            clock: Arc::new(Utc::now),
        }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }
}

#[derive(Clone)]
struct AppState {
    service: Arc<Service>,
    queue: mpsc::Sender<Event>,
}

pub fn router(service: Arc<Service>, queue: mpsc::Sender<Event>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/webhook", post(webhook))
        .route("/v1/scan", post(scan))
        .route("/v1/replay", post(replay))
        .with_state(AppState { service, queue })
}

fn header<'a>(headers: &'a HeaderMap, name: &str) -> Option<&'a str> {
    headers.get(name).and_then(|v| v.to_str().ok())
}

/// Reads source, delivery id and signature from the headers, and checks the signature.
fn delivery(headers: &HeaderMap, body: &Bytes, secret: &[u8]) -> Result<Delivery, (StatusCode, String)> {
    let (source, event_name, signature_header, verified) = if let Some(event) = header(headers, "x-github-event") {
        let sig = header(headers, "x-hub-signature-256").unwrap_or("");
        (Source::GitHubLike, event, sig, verify_signature(body, secret, sig))
    } else if let Some(event) = header(headers, "x-gitlab-event") {
        let token = header(headers, "x-gitlab-token").unwrap_or("");
        (Source::GitLabLike, event, token, verify_token(secret, token))
    } else {
        return Err((StatusCode::BAD_REQUEST, "unknown webhook source".into()));
    };
    if !verified {
        return Err((StatusCode::UNAUTHORIZED, "bad signature".into()));
    }
    let delivery_id = match source {
        Source::GitHubLike => header(headers, "x-github-delivery").map(str::to_owned),
        // Older GitLab versions send no delivery id; a body digest still dedups redeliveries.
        Source::GitLabLike => header(headers, "x-gitlab-event-uuid")
            .map(str::to_owned)
            .or_else(|| Some(format!("gitlab-{}", hex::encode(Sha256::digest(body))))),
    };
    let Some(delivery_id) = delivery_id else {
        return Err((StatusCode::BAD_REQUEST, "missing delivery id".into()));
    };
    Ok(Delivery {
        source,
        delivery_id,
        event_name: event_name.to_string(),
        signature_header: signature_header.to_string(),
        raw_body: body.to_vec(),
    })
}

async fn webhook(State(app): State<AppState>, headers: HeaderMap, body: Bytes) -> Response {
    let delivery = match delivery(&headers, &body, &app.service.secret) {
        Ok(d) => d,
        Err((status, why)) => {
            tracing::warn!(%why, "rejected webhook");
            return (status, why).into_response();
        }
    };
    let received_at = (app.service.clock)();
    match normalize(&delivery, &app.service.config, received_at) {
        Ok(Normalized::Unsupported(why)) => {
            tracing::debug!(delivery = %delivery.delivery_id, %why, "ignored webhook");
            (StatusCode::OK, format!("ignored: {why}")).into_response()
        }
        Ok(Normalized::Event(event)) => match app.queue.try_send(*event) {
            Ok(()) => (StatusCode::ACCEPTED, "queued").into_response(),
            Err(mpsc::error::TrySendError::Full(_)) => {
                tracing::warn!(delivery = %delivery.delivery_id, "queue full");
                (StatusCode::SERVICE_UNAVAILABLE, "queue full").into_response()
            }
            Err(mpsc::error::TrySendError::Closed(_)) => {
                (StatusCode::SERVICE_UNAVAILABLE, "shutting down").into_response()
            }
        },
        Err(e) => {
            tracing::warn!(delivery = %delivery.delivery_id, error = %e, "malformed webhook");
            (StatusCode::BAD_REQUEST, e.to_string()).into_response()
        }
    }
}

fn authorized(headers: &HeaderMap, secret: &[u8]) -> bool {
    header(headers, "authorization")
        .and_then(|h| h.strip_prefix("Bearer "))
        .is_some_and(|token| !secret.is_empty() && bool::from(token.as_bytes().ct_eq(secret)))
}

fn api_error(status: StatusCode, error: impl Into<String>, line: Option<usize>) -> Response {
    (status, Json(ApiError { error: error.into(), line })).into_response()
}

async fn scan(State(app): State<AppState>, headers: HeaderMap, Json(req): Json<ScanRequest>) -> Response {
    if !authorized(&headers, &app.service.secret) {
        return api_error(StatusCode::UNAUTHORIZED, "missing or wrong bearer token", None);
    }
    let now = req.now.unwrap_or_else(|| (app.service.clock)());
    let s = &app.service;
    Json(ops::scan(s.config.clone(), s.gateway.clone(), now, req.dry_run).await).into_response()
}

async fn replay(State(app): State<AppState>, headers: HeaderMap, Json(req): Json<ReplayRequest>) -> Response {
    if !authorized(&headers, &app.service.secret) {
        return api_error(StatusCode::UNAUTHORIZED, "missing or wrong bearer token", None);
    }
    let epoch = req.epoch.unwrap_or_else(forgebot_sim::default_epoch);
    match ops::replay(app.service.config.clone(), &req.script, epoch).await {
        Ok(report) => Json(report).into_response(),
        Err(e) => api_error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string(), Some(e.line)),
    }
}

/// Feeds queued events to the engine. Events run concurrently; the engine serializes
/// those touching the same PR or branch.
pub async fn dispatch_loop(service: Arc<Service>, mut queue: mpsc::Receiver<Event>) {
    while let Some(event) = queue.recv().await {
        let service = service.clone();
        tokio::spawn(async move {
            let report = service.engine.dispatch(&event, &*service.gateway).await;
            for f in &report.failures {
                tracing::warn!(delivery = %event.delivery_id, workflow = %f.workflow, error = %f.error, "workflow failed");
            }
            for e in report.executed.iter().filter(|e| e.result.is_err()) {
                tracing::warn!(delivery = %event.delivery_id, action = %e.action.kind, "action failed");
            }
        });
    }
}

/// Enqueues a scan tick for every configured repository each day at the configured hour.
pub async fn scheduler(service: Arc<Service>, queue: mpsc::Sender<Event>) {
    loop {
        let now = (service.clock)();
        let Some(at) = next_tick(now, service.config.scan_hour) else {
            tracing::error!(hour = service.config.scan_hour, "invalid scan hour, scheduler stopped");
            return;
        };
        let wait = (at - now).to_std().unwrap_or_default();
        tokio::time::sleep(wait).await;
        for repo in service.config.repos.keys() {
            if queue.send(Event::tick(repo, at)).await.is_err() {
                return;
            }
        }
    }
}

/// Serves until the listener fails, with the dispatch loop and scheduler running alongside.
pub async fn serve(service: Arc<Service>, listener: tokio::net::TcpListener, queue_capacity: usize) -> std::io::Result<()> {
    let (tx, rx) = mpsc::channel(queue_capacity.max(1));
    tokio::spawn(dispatch_loop(service.clone(), rx));
    tokio::spawn(scheduler(service.clone(), tx.clone()));
    axum::serve(listener, router(service, tx)).await
}
