//! Typed client for a running bot service.

use chrono::{DateTime, Utc};
use reqwest::{StatusCode, Url};
use serde::de::DeserializeOwned;
use serde::Serialize;

use forgebot_core::api::{ApiError, ReplayReport, ReplayRequest, ScanReport, ScanRequest};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("invalid server URL {0}")]
    BadUrl(String),
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    /// The server answered with an error body.
    #[error("server answered {status}: {}", .body.error)]
    Api { status: StatusCode, body: ApiError },
}

pub struct Client {
    base: Url,
    token: Option<String>,
    http: reqwest::Client,
}

impl Client {
    /// `token` is sent as a bearer token to the `/v1` endpoints.
    pub fn new(base: &str, token: Option<String>) -> Result<Self, ClientError> {
        let mut base = Url::parse(base).map_err(|_| ClientError::BadUrl(base.into()))?;
        if !base.path().ends_with('/') {
            base.set_path(&format!("{}/", base.path()));
        }
        Ok(Self {
            base,
            token,
            http: reqwest::Client::new(),
        })
    }

    fn url(&self, path: &str) -> Result<Url, ClientError> {
        self.base.join(path).map_err(|_| ClientError::BadUrl(path.into()))
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ClientError> {
        let mut req = self.http.post(self.url(path)?).json(body);
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().await?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await?;
        let body = serde_json::from_str(&text).unwrap_or(ApiError { error: text, line: None });
        Err(ClientError::Api { status, body })
    }

    pub async fn health(&self) -> Result<String, ClientError> {
        Ok(self.http.get(self.url("health")?).send().await?.error_for_status()?.text().await?)
    }

    pub async fn scan(&self, now: Option<DateTime<Utc>>, dry_run: bool) -> Result<ScanReport, ClientError> {
        self.post("v1/scan", &ScanRequest { now, dry_run }).await
    }

    pub async fn replay(&self, script: &str, epoch: Option<DateTime<Utc>>) -> Result<ReplayReport, ClientError> {
        let req = ReplayRequest {
            script: script.to_string(),
            epoch,
        };
        self.post("v1/replay", &req).await
    }
}
