use std::net::IpAddr;
use std::path::Path;
use std::sync::Arc;

use audit_core::corpus::{PostRecord, RemovalReason, StatusReport};
use reqwest::StatusCode;
use serde::Deserialize;
use url::Url;

use crate::api::{ApiChannel, PartialChannel};
use crate::fixtures::{newest_posts, FixtureStore};
use crate::policy::{FetchPolicy, RateLimiter};
use crate::status::{RawPage, StatusRules};
use crate::CollectorError;

pub const DEFAULT_POST_LIMIT: usize = 100;

/// Where channel data comes from.
#[derive(Debug, Clone)]
pub enum Endpoint {
    /// A server exposing the mock API layout.
    Http(Url),
    /// Fixtures read straight from disk or memory; no requests are made.
    Fixtures(Arc<FixtureStore>),
}

impl Endpoint {
    /// An existing directory is a fixture store, anything else a URL.
    pub fn parse(s: &str) -> Result<Self, CollectorError> {
        let path = Path::new(s);
        if path.is_dir() {
            return Ok(Endpoint::Fixtures(Arc::new(FixtureStore::load_dir(path)?)));
        }
        let url = Url::parse(s).map_err(|e| CollectorError::Endpoint(format!("{s}: {e}")))?;
        if !matches!(url.scheme(), "http" | "https") {
            return Err(CollectorError::Endpoint(format!("{s}: not an http(s) URL")));
        }
        Ok(Endpoint::Http(url))
    }
}

pub fn is_local(url: &Url) -> bool {
    match url.host() {
        Some(url::Host::Domain(d)) => d.eq_ignore_ascii_case("localhost"),
        Some(url::Host::Ipv4(ip)) => IpAddr::V4(ip).is_loopback(),
        Some(url::Host::Ipv6(ip)) => IpAddr::V6(ip).is_loopback(),
        None => false,
    }
}

fn check_id(id: &str) -> Result<(), CollectorError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(CollectorError::BadId(id.to_string()))
    }
}

#[derive(Deserialize)]
struct PostsBody {
    posts: Vec<PostRecord>,
}

struct Response {
    status: StatusCode,
    body: String,
}

pub struct Client {
    endpoint: Endpoint,
    policy: FetchPolicy,
    rules: StatusRules,
    limiter: RateLimiter,
    http: reqwest::Client,
}

impl Client {
    /// Non-loopback HTTP endpoints are refused unless `allow_remote` is set.
    pub fn new(
        endpoint: Endpoint,
        policy: FetchPolicy,
        rules: StatusRules,
        allow_remote: bool,
    ) -> Result<Self, CollectorError> {
        policy.validate()?;
        if let Endpoint::Http(url) = &endpoint {
            if !allow_remote && !is_local(url) {
                return Err(CollectorError::RemoteEndpoint(url.to_string()));
            }
        }
        let http = reqwest::Client::builder()
            .user_agent(concat!("audit-collector/", env!("CARGO_PKG_VERSION")))
            .timeout(std::time::Duration::from_secs(30))
            .build()
            .map_err(|e| CollectorError::Endpoint(e.to_string()))?;
        Ok(Client {
            limiter: RateLimiter::new(&policy),
            endpoint,
            policy,
            rules,
            http,
        })
    }

    pub fn policy(&self) -> &FetchPolicy {
        &self.policy
    }

    fn url(base: &Url, path: &str) -> String {
        format!("{}/{path}", base.as_str().trim_end_matches('/'))
    }

    /// GET through the limiter, retrying transport errors and 5xx answers.
    async fn get(&self, base: &Url, path: &str, page: bool) -> Result<Response, CollectorError> {
        let url = Self::url(base, path);
        let host = format!(
            "{}:{}",
            base.host_str().unwrap_or_default(),
            base.port_or_known_default().unwrap_or(0)
        );
        let mut last = String::new();
        for attempt in 0..=self.policy.retries {
            let mut slot = self.limiter.acquire(&host).await;
            let result = async {
                let resp = self.http.get(&url).send().await;
                slot.sent();
                let resp = resp?;
                let status = resp.status();
                let body = resp.text().await?;
                Ok::<_, reqwest::Error>(Response { status, body })
            }
            .await;
            match result {
                Ok(r) if !r.status.is_server_error() => {
                    if page {
                        tokio::time::sleep(self.policy.page_settle_delay).await;
                    }
                    drop(slot);
                    return Ok(r);
                }
                Ok(r) => last = format!("HTTP {}", r.status),
                Err(e) => last = e.to_string(),
            }
            log::warn!("GET {url} attempt {} failed: {last}", attempt + 1);
        }
        Err(CollectorError::Transport { url, message: last })
    }

    /// Fetch the HTML page of a channel.
    pub async fn fetch_page(&self, channel_id: &str) -> Result<RawPage, CollectorError> {
        check_id(channel_id)?;
        match &self.endpoint {
            Endpoint::Http(base) => {
                let path = format!("channel/{channel_id}");
                let r = self.get(base, &path, true).await?;
                Ok(RawPage::new(Self::url(base, &path), r.body))
            }
            Endpoint::Fixtures(store) => {
                let f = store.get(channel_id).cloned().unwrap_or_default();
                if f.fail {
                    return Err(fixture_failure(channel_id));
                }
                Ok(RawPage::new(format!("fixture:channel/{channel_id}"), f.html(channel_id)))
            }
        }
    }

    /// API metadata for a channel. When the API has nothing, the channel's
    /// page is parsed for the removal reason.
    pub async fn fetch_channel(&self, channel_id: &str) -> Result<PartialChannel, CollectorError> {
        check_id(channel_id)?;
        let api = match &self.endpoint {
            Endpoint::Http(base) => {
                let r = self.get(base, &format!("api/channels/{channel_id}"), false).await?;
                match r.status {
                    s if s.is_success() => Some(parse_api(channel_id, &r.body)?),
                    StatusCode::NOT_FOUND | StatusCode::GONE | StatusCode::FORBIDDEN => None,
                    s => {
                        return Err(CollectorError::Transport {
                            url: Self::url(base, &format!("api/channels/{channel_id}")),
                            message: format!("HTTP {s}"),
                        })
                    }
                }
            }
            Endpoint::Fixtures(store) => {
                let f = store.get(channel_id).ok_or_else(|| fixture_failure(channel_id))?;
                if f.fail {
                    return Err(fixture_failure(channel_id));
                }
                f.channel.clone()
            }
        };
        if let Some(api) = api {
            return Ok(PartialChannel {
                channel_id: channel_id.to_string(),
                api: Some(api),
                status: StatusReport::available(),
            });
        }
        let page = self.fetch_page(channel_id).await?;
        let mut status = self.rules.parse(&page);
        if status.available {
            // The API denied the channel but the page shows no notice.
            status = StatusReport::removed(RemovalReason::OtherUnavailable, None);
        }
        Ok(PartialChannel {
            channel_id: channel_id.to_string(),
            api: None,
            status,
        })
    }

    /// Up to `limit` newest community posts. A channel without a community
    /// tab has no posts.
    pub async fn fetch_posts(
        &self,
        channel_id: &str,
        limit: usize,
    ) -> Result<Vec<PostRecord>, CollectorError> {
        check_id(channel_id)?;
        if limit == 0 {
            return Ok(Vec::new());
        }
        let posts = match &self.endpoint {
            Endpoint::Http(base) => {
                let path = format!("api/channels/{channel_id}/posts?limit={limit}");
                let r = self.get(base, &path, false).await?;
                if r.status == StatusCode::NOT_FOUND {
                    return Ok(Vec::new());
                }
                if !r.status.is_success() {
                    return Err(CollectorError::Transport {
                        url: Self::url(base, &path),
                        message: format!("HTTP {}", r.status),
                    });
                }
                serde_json::from_str::<PostsBody>(&r.body)
                    .map_err(|e| CollectorError::Payload {
                        channel_id: channel_id.to_string(),
                        message: e.to_string(),
                    })?
                    .posts
            }
            Endpoint::Fixtures(store) => match store.get(channel_id) {
                Some(f) if f.fail => return Err(fixture_failure(channel_id)),
                Some(f) => f.posts.clone().unwrap_or_default(),
                None => Vec::new(),
            },
        };
        Ok(newest_posts(&posts, limit))
    }
}

fn parse_api(channel_id: &str, body: &str) -> Result<ApiChannel, CollectorError> {
    let api: ApiChannel = serde_json::from_str(body).map_err(|e| CollectorError::Payload {
        channel_id: channel_id.to_string(),
        message: e.to_string(),
    })?;
    if api.id != channel_id {
        return Err(CollectorError::Payload {
            channel_id: channel_id.to_string(),
            message: format!("response is for channel {:?}", api.id),
        });
    }
    Ok(api)
}

fn fixture_failure(id: &str) -> CollectorError {
    CollectorError::Transport {
        url: format!("fixture:{id}"),
        message: "no usable fixture".into(),
    }
}
