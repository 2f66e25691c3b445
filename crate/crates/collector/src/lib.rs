//! Polite channel metadata collection: an HTTP client with a shared rate
//! limiter, a data-driven page-status parser, and a fixture-backed mock
//! server. Non-loopback endpoints must be enabled explicitly.

mod api;
mod client;
mod crawl;
mod fixtures;
pub mod mock;
mod policy;
mod status;

use thiserror::Error;

pub use api::{ApiChannel, PartialChannel, UNKNOWN_DATE};
pub use client::{is_local, Client, Endpoint, DEFAULT_POST_LIMIT};
pub use crawl::{crawl, CrawlFailure, CrawlReport, FailureSummary};
pub use fixtures::{newest_posts, removal_message, removal_page, Fixture, FixtureStore};
pub use policy::{FetchPolicy, RateLimiter, Slot};
pub use status::{parse_status, RawPage, StatusRules};

#[derive(Debug, Error)]
pub enum CollectorError {
    #[error("invalid fetch policy: {0}")]
    Policy(String),
    #[error("status rules: {0}")]
    Rules(String),
    #[error("endpoint {0}")]
    Endpoint(String),
    #[error("{0} is not a loopback endpoint; pass --i-understand-tos to crawl it")]
    RemoteEndpoint(String),
    #[error("invalid channel id {0:?}")]
    BadId(String),
    #[error("GET {url}: {message}")]
    Transport { url: String, message: String },
    #[error("channel {channel_id}: {message}")]
    Payload { channel_id: String, message: String },
    #[error("fixtures: {0}")]
    Fixture(String),
}
