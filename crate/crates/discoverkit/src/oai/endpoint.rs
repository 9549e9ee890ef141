//! Endpoint configuration for a single OAI-PMH base URL.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use url::Url;

use super::OaiError;

pub const DEFAULT_TIMEOUT_SECS: u64 = 30;
pub const DEFAULT_MAX_RETRIES: u32 = 3;
pub const DEFAULT_POLITENESS_MS: u64 = 1000;
pub const DEFAULT_BACKOFF_MS: u64 = 1000;

/// One repository endpoint plus the client knobs used when talking to it.
///
/// Defaults are deliberately gentle: 30 s timeout, 3 retries backing off
/// 1 s / 2 s / 4 s, and a 1 s pause between page requests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OaiEndpoint {
    pub base_url: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_politeness")]
    pub politeness_delay_ms: u64,
    /// First retry delay; doubles per attempt.
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_SECS
}
fn default_retries() -> u32 {
    DEFAULT_MAX_RETRIES
}
fn default_politeness() -> u64 {
    DEFAULT_POLITENESS_MS
}
fn default_backoff() -> u64 {
    DEFAULT_BACKOFF_MS
}

impl OaiEndpoint {
    /// Validates that `base_url` is an absolute http(s) URL.
    pub fn new(base_url: impl Into<String>) -> Result<Self, OaiError> {
        let base_url = base_url.into();
        let parsed = Url::parse(&base_url)
            .map_err(|e| OaiError::InvalidEndpoint(format!("{base_url}: {e}")))?;
        if parsed.scheme() != "http" && parsed.scheme() != "https" {
            return Err(OaiError::InvalidEndpoint(format!(
                "{base_url}: scheme must be http or https"
            )));
        }
        if parsed.host_str().is_none() {
            return Err(OaiError::InvalidEndpoint(format!(
                "{base_url}: missing host"
            )));
        }
        Ok(OaiEndpoint {
            base_url,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            max_retries: DEFAULT_MAX_RETRIES,
            politeness_delay_ms: DEFAULT_POLITENESS_MS,
            backoff_ms: DEFAULT_BACKOFF_MS,
        })
    }

    pub fn with_timeout(mut self, secs: u64) -> Self {
        self.timeout_secs = secs.max(1);
        self
    }

    pub fn with_max_retries(mut self, n: u32) -> Self {
        self.max_retries = n;
        self
    }

    pub fn with_politeness_delay_ms(mut self, ms: u64) -> Self {
        self.politeness_delay_ms = ms;
        self
    }

    pub fn with_backoff_ms(mut self, ms: u64) -> Self {
        self.backoff_ms = ms;
        self
    }

    /// Endpoint tuned for talking to a local test server: no politeness
    /// delay, short timeout, fast backoff.
    pub fn local(base_url: impl Into<String>) -> Result<Self, OaiError> {
        Ok(Self::new(base_url)?
            .with_timeout(5)
            .with_politeness_delay_ms(0)
            .with_backoff_ms(10))
    }

    pub fn timeout(&self) -> Duration {
        // a zero timeout smuggled in through deserialization means "hang";
        // clamp to the invariant instead
        Duration::from_secs(self.timeout_secs.max(1))
    }

    pub fn politeness_delay(&self) -> Duration {
        Duration::from_millis(self.politeness_delay_ms)
    }
}
