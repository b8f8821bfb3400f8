//! Generic HTTP paged source. Expects the endpoint to answer with a GeoJSON
//! FeatureCollection; vendor payloads are passed through untouched.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde_json::Value;

use super::area::TileRect;
use super::source::{feature_key, Page, PagedSource, RawRecord, SourceError};
use super::PagedSourceConfig;

pub const API_KEY_HEADER: &str = "X-Api-Key";

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub retries: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { retries: 3, initial_backoff: Duration::from_millis(500) }
    }
}

pub struct HttpSource {
    source_id: String,
    base_url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    retry: RetryPolicy,
    min_interval: Option<Duration>,
    last_request: Mutex<Option<Instant>>,
}

impl HttpSource {
    pub fn new(config: &PagedSourceConfig) -> Result<Self, SourceError> {
        let base_url = config
            .base_url
            .clone()
            .ok_or_else(|| SourceError::Http(format!("source `{}` has no base_url", config.source_id)))?;
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| SourceError::MissingEnv(var.clone()))?),
            None => None,
        };
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs(30))).build().into();
        let min_interval = config
            .requests_per_second
            .filter(|r| *r > 0.0)
            .map(|r| Duration::from_secs_f64(1.0 / r));
        Ok(Self {
            source_id: config.source_id.clone(),
            base_url,
            api_key,
            agent,
            retry: RetryPolicy::default(),
            min_interval,
            last_request: Mutex::new(None),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn request_url(&self, rect: &TileRect, offset: usize) -> String {
        format!("{}?bbox={},{},{},{}&offset={}", self.base_url, rect.south, rect.west, rect.north, rect.east, offset)
    }

    fn throttle(&self) {
        let Some(interval) = self.min_interval else { return };
        let mut last = self.last_request.lock().expect("throttle lock poisoned");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < interval {
                std::thread::sleep(interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn fetch_once(&self, url: &str) -> Result<String, SourceError> {
        self.throttle();
        let mut req = self.agent.get(url);
        if let Some(key) = &self.api_key {
            req = req.header(API_KEY_HEADER, key);
        }
        let mut resp = req.call().map_err(|e| SourceError::Http(e.to_string()))?;
        resp.body_mut().read_to_string().map_err(|e| SourceError::Http(e.to_string()))
    }

    fn fetch(&self, url: &str) -> Result<String, SourceError> {
        let mut backoff = self.retry.initial_backoff;
        let mut attempt = 0;
        loop {
            match self.fetch_once(url) {
                Ok(body) => return Ok(body),
                Err(e) if attempt < self.retry.retries => {
                    log::warn!("{}: request failed ({e}), retrying in {backoff:?}", self.source_id);
                    std::thread::sleep(backoff);
                    backoff *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

impl PagedSource for HttpSource {
    fn source_id(&self) -> &str {
        &self.source_id
    }

    fn query(&self, rect: &TileRect, offset: usize, limit: usize) -> Result<Page, SourceError> {
        let url = self.request_url(rect, offset);
        let body = self.fetch(&url)?;
        let doc: Value = serde_json::from_str(&body).map_err(|e| SourceError::Http(format!("bad JSON: {e}")))?;
        let features = doc
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| SourceError::Http("response is not a FeatureCollection".into()))?;
        let mut records = Vec::with_capacity(features.len());
        for f in features.iter().take(limit) {
            let (native_id, _, _) =
                feature_key(f).ok_or_else(|| SourceError::Http("feature lacks native_id, lat or lon".into()))?;
            records.push(RawRecord { source_id: self.source_id.clone(), native_id, payload: f.clone() });
        }
        let more = doc.get("has_more").and_then(Value::as_bool).unwrap_or(features.len() >= limit);
        Ok(Page { records, more })
    }
}
