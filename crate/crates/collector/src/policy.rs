use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex as AsyncMutex, OwnedMutexGuard, Semaphore, SemaphorePermit};
use tokio::time::Instant;

use crate::CollectorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FetchPolicy {
    pub max_concurrent_requests: usize,
    #[serde(with = "millis")]
    pub min_inter_request_delay: Duration,
    /// Extra wait after an HTML page arrives before it is parsed.
    #[serde(with = "millis")]
    pub page_settle_delay: Duration,
    pub retries: u32,
}

impl Default for FetchPolicy {
    fn default() -> Self {
        FetchPolicy {
            max_concurrent_requests: 1,
            min_inter_request_delay: Duration::from_secs(1),
            page_settle_delay: Duration::from_secs(2),
            retries: 2,
        }
    }
}

impl FetchPolicy {
    pub fn validate(&self) -> Result<(), CollectorError> {
        if self.max_concurrent_requests == 0 {
            return Err(CollectorError::Policy("max_concurrent_requests must be at least 1".into()));
        }
        if self.min_inter_request_delay.is_zero() || self.page_settle_delay.is_zero() {
            return Err(CollectorError::Policy("delays must be positive".into()));
        }
        Ok(())
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

/// Shared limiter: at most `max_concurrent_requests` requests in flight,
/// and per host a request may only be sent `min_inter_request_delay` after
/// the previous one was answered. The server has seen a request by the time
/// its response headers arrive, so arrival gaps at the server can never fall
/// below the minimum, whatever the transport latency.
#[derive(Debug)]
pub struct RateLimiter {
    slots: Semaphore,
    gap: Duration,
    hosts: Mutex<HashMap<String, Arc<AsyncMutex<Instant>>>>,
}

/// Permission to send one request. Call [`Slot::sent`] once the response
/// headers are in; dropping the slot does the same.
pub struct Slot<'a> {
    _permit: SemaphorePermit<'a>,
    host: Option<OwnedMutexGuard<Instant>>,
    gap: Duration,
}

impl Slot<'_> {
    /// Release the host for the next request after the gap.
    pub fn sent(&mut self) {
        if let Some(mut next) = self.host.take() {
            *next = Instant::now() + self.gap;
        }
    }
}

impl Drop for Slot<'_> {
    fn drop(&mut self) {
        self.sent();
    }
}

impl RateLimiter {
    pub fn new(policy: &FetchPolicy) -> Self {
        RateLimiter {
            slots: Semaphore::new(policy.max_concurrent_requests),
            gap: policy.min_inter_request_delay,
            hosts: Mutex::new(HashMap::new()),
        }
    }

    /// Wait for a free slot and this host's turn. Hold the slot until the
    /// response has been consumed.
    pub async fn acquire(&self, host: &str) -> Slot<'_> {
        let permit = self.slots.acquire().await.expect("limiter semaphore never closes");
        let lock = self
            .hosts
            .lock()
            .expect("limiter lock")
            .entry(host.to_string())
            .or_insert_with(|| Arc::new(AsyncMutex::new(Instant::now())))
            .clone();
        let next = lock.lock_owned().await;
        tokio::time::sleep_until(*next).await;
        Slot {
            _permit: permit,
            host: Some(next),
            gap: self.gap,
        }
    }
}
