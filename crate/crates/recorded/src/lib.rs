//! Serves canned forge responses so HTTP gateways can be tested without the network.
//!
//! Recordings are tried in file order; the first one whose method, encoded path and optional
//! filters match answers the request. A recording with `times` answers that many requests and
//! then stops matching, which scripts sequences such as "throttled twice, then fine".

use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::http::{HeaderName, HeaderValue, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;
use serde::Deserialize;
use serde_json::Value;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recording {
    pub method: String,
    /// Percent-encoded path, e.g. `/gitlab/projects/coq%2Fcoq-ci/jobs/1/trace`.
    pub path: String,
    #[serde(default)]
    pub query_contains: Option<String>,
    /// GraphQL `operationName` of the request body.
    #[serde(default)]
    pub operation: Option<String>,
    #[serde(default)]
    pub body_contains: Option<String>,
    #[serde(default = "ok")]
    pub status: u16,
    #[serde(default)]
    pub json: Option<Value>,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub headers: Vec<(String, String)>,
    #[serde(default)]
    pub times: Option<usize>,
    #[serde(default)]
    pub delay_ms: u64,
}

fn ok() -> u16 {
    200
}

impl Recording {
    pub fn new(method: &str, path: &str, status: u16) -> Self {
        Self {
            method: method.into(),
            path: path.into(),
            query_contains: None,
            operation: None,
            body_contains: None,
            status,
            json: None,
            text: None,
            headers: Vec::new(),
            times: None,
            delay_ms: 0,
        }
    }

    pub fn json(mut self, body: Value) -> Self {
        self.json = Some(body);
        self
    }

    pub fn times(mut self, n: usize) -> Self {
        self.times = Some(n);
        self
    }

    pub fn header(mut self, name: &str, value: &str) -> Self {
        self.headers.push((name.into(), value.into()));
        self
    }

    pub fn delay(mut self, ms: u64) -> Self {
        self.delay_ms = ms;
        self
    }

    fn matches(&self, method: &Method, path: &str, query: &str, body: &str) -> bool {
        if !self.method.eq_ignore_ascii_case(method.as_str()) || self.path != path {
            return false;
        }
        if self.query_contains.as_ref().is_some_and(|q| !query.contains(q.as_str())) {
            return false;
        }
        if self.body_contains.as_ref().is_some_and(|b| !body.contains(b.as_str())) {
            return false;
        }
        if let Some(op) = &self.operation {
            let name = serde_json::from_str::<Value>(body)
                .ok()
                .and_then(|v| v.get("operationName").and_then(Value::as_str).map(str::to_owned));
            if name.as_deref() != Some(op.as_str()) {
                return false;
            }
        }
        true
    }
}

/// Loads a JSON array of recordings.
pub fn load(path: &Path) -> Result<Vec<Recording>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeenRequest {
    pub method: String,
    pub path: String,
    pub query: String,
    pub body: String,
}

struct Shared {
    recordings: Vec<(Recording, AtomicUsize)>,
    seen: Mutex<Vec<SeenRequest>>,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
}

pub struct RecordedServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    task: tokio::task::JoinHandle<()>,
}

impl RecordedServer {
    pub async fn start(recordings: Vec<Recording>) -> std::io::Result<Self> {
        let shared = Arc::new(Shared {
            recordings: recordings.into_iter().map(|r| (r, AtomicUsize::new(0))).collect(),
            seen: Mutex::new(Vec::new()),
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
        });
        let state = shared.clone();
        let app = Router::new().fallback(move |method: Method, uri: Uri, body: Bytes| {
            let state = state.clone();
            async move { answer(&state, method, uri, body).await }
        });
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let task = tokio::spawn(async move {
            let _ = axum::serve(listener, app).await;
        });
        Ok(Self { addr, shared, task })
    }

    /// Base URL for requests under `prefix`, e.g. `url("/github")`.
    pub fn url(&self, prefix: &str) -> String {
        format!("http://{}{prefix}", self.addr)
    }

    pub fn requests(&self) -> Vec<SeenRequest> {
        self.shared.seen.lock().expect("request log poisoned").clone()
    }

    /// Highest number of requests handled at the same time.
    pub fn peak_in_flight(&self) -> usize {
        self.shared.peak_in_flight.load(Ordering::SeqCst)
    }
}

impl Drop for RecordedServer {
    fn drop(&mut self) {
        self.task.abort();
    }
}

async fn answer(shared: &Shared, method: Method, uri: Uri, body: Bytes) -> Response {
    let now = shared.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    shared.peak_in_flight.fetch_max(now, Ordering::SeqCst);
    let body = String::from_utf8_lossy(&body).into_owned();
    let path = uri.path().to_string();
    let query = uri.query().unwrap_or("").to_string();
    shared.seen.lock().expect("request log poisoned").push(SeenRequest {
        method: method.to_string(),
        path: path.clone(),
        query: query.clone(),
        body: body.clone(),
    });
    let found = shared.recordings.iter().find(|(r, used)| {
        r.matches(&method, &path, &query, &body)
            && match r.times {
                // Claim a use atomically so concurrent requests cannot overdraw it.
                Some(n) => used
                    .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |u| (u < n).then_some(u + 1))
                    .is_ok(),
                None => true,
            }
    });
    let response = match found {
        Some((r, _)) => {
            if r.delay_ms > 0 {
                tokio::time::sleep(Duration::from_millis(r.delay_ms)).await;
            }
            respond(r)
        }
        None => (StatusCode::NOT_IMPLEMENTED, format!("no recording for {method} {path}?{query}")).into_response(),
    };
    shared.in_flight.fetch_sub(1, Ordering::SeqCst);
    response
}

fn respond(r: &Recording) -> Response {
    let status = StatusCode::from_u16(r.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let mut response = match (&r.json, &r.text) {
        (Some(json), _) => (status, axum::Json(json.clone())).into_response(),
        (None, Some(text)) => (status, text.clone()).into_response(),
        (None, None) => status.into_response(),
    };
    for (name, value) in &r.headers {
        if let (Ok(name), Ok(value)) = (HeaderName::try_from(name.as_str()), HeaderValue::from_str(value)) {
            response.headers_mut().insert(name, value);
        }
    }
    response
}
