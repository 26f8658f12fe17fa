//! Error type and HTTP plumbing shared by the external model providers
//! (completion, embedding, texturing).

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("no recorded completion for prompt {key} (replay mode)")]
    ReplayMiss { key: String },
    #[error("provider rejected request with HTTP {status}")]
    Rejected { status: u16 },
    #[error("provider protocol error: {0}")]
    Protocol(String),
    #[error("provider i/o error: {0}")]
    Io(String),
}

impl ProviderError {
    /// True when the failure means the provider could not be reached at all.
    pub fn is_unavailable(&self) -> bool {
        matches!(self, ProviderError::Unavailable(_))
    }
}

/// Connection settings for an HTTP-backed provider.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoint {
    pub url: String,
    pub token: Option<String>,
}

impl Endpoint {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into().trim_end_matches('/').to_string(),
            token: None,
        }
    }

    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token.filter(|t| !t.is_empty());
        self
    }

    /// Reads `<url_var>` and `<token_var>`; `None` when the URL is unset.
    pub fn from_env(url_var: &str, token_var: &str) -> Option<Self> {
        let url = std::env::var(url_var).ok().filter(|u| !u.trim().is_empty())?;
        Some(Self::new(url).with_token(std::env::var(token_var).ok()))
    }

    pub fn join(&self, path: &str) -> String {
        format!("{}/{}", self.url, path.trim_start_matches('/'))
    }
}

pub(crate) fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .build()
        .into()
}

pub(crate) fn map_err(err: ureq::Error) -> ProviderError {
    match err {
        ureq::Error::StatusCode(status) => ProviderError::Rejected { status },
        ureq::Error::Io(e) => ProviderError::Unavailable(e.to_string()),
        e @ (ureq::Error::ConnectionFailed | ureq::Error::HostNotFound | ureq::Error::Timeout(_)) => {
            ProviderError::Unavailable(e.to_string())
        }
        other => ProviderError::Protocol(other.to_string()),
    }
}

fn authorize<B>(req: ureq::RequestBuilder<B>, token: Option<&str>) -> ureq::RequestBuilder<B> {
    match token {
        Some(t) => req.header("Authorization", format!("Bearer {t}")),
        None => req,
    }
}

pub(crate) fn post_json<B: Serialize, R: DeserializeOwned>(
    agent: &ureq::Agent,
    endpoint: &Endpoint,
    url: &str,
    body: &B,
) -> Result<R, ProviderError> {
    let req = authorize(agent.post(url), endpoint.token.as_deref());
    let mut resp = req.send_json(body).map_err(map_err)?;
    resp.body_mut().read_json::<R>().map_err(|e| ProviderError::Protocol(e.to_string()))
}

pub(crate) fn get_json<R: DeserializeOwned>(agent: &ureq::Agent, endpoint: &Endpoint, url: &str) -> Result<R, ProviderError> {
    let req = authorize(agent.get(url), endpoint.token.as_deref());
    let mut resp = req.call().map_err(map_err)?;
    resp.body_mut().read_json::<R>().map_err(|e| ProviderError::Protocol(e.to_string()))
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes.as_ref()))
}
