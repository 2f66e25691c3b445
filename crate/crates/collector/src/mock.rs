//! Fixture-backed HTTP server speaking the collector's API layout, with a
//! request log for checking crawl politeness.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;
use url::Url;

use crate::fixtures::{newest_posts, FixtureStore};
use crate::policy::FetchPolicy;

/// One served request; times are microseconds since server start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub start_us: u64,
    pub end_us: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoggedRequest {
    pub path: String,
    #[serde(flatten)]
    pub time: LogEntry,
}

#[derive(Clone)]
struct AppState {
    store: Arc<FixtureStore>,
    log: Arc<Mutex<Vec<LoggedRequest>>>,
    epoch: Instant,
    latency: Duration,
}

pub struct MockServer {
    addr: SocketAddr,
    log: Arc<Mutex<Vec<LoggedRequest>>>,
    shutdown: Option<oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<()>,
}

impl MockServer {
    /// Serve `store` on an ephemeral loopback port. Each request is held for
    /// `latency` so overlapping requests show up in the log.
    pub async fn start(store: FixtureStore, latency: Duration) -> std::io::Result<Self> {
        Self::bind("127.0.0.1:0".parse().expect("literal address"), store, latency).await
    }

    pub async fn bind(
        addr: SocketAddr,
        store: FixtureStore,
        latency: Duration,
    ) -> std::io::Result<Self> {
        let state = AppState {
            store: Arc::new(store),
            log: Arc::new(Mutex::new(Vec::new())),
            epoch: Instant::now(),
            latency,
        };
        let log = state.log.clone();
        let logged = Router::new()
            .route("/api/channels/{id}", get(api_channel))
            .route("/api/channels/{id}/posts", get(api_posts))
            .route("/channel/{id}", get(channel_page))
            .layer(middleware::from_fn_with_state(state.clone(), record));
        let app = Router::new()
            .route("/_log", get(request_log))
            .merge(logged)
            .with_state(state);
        let listener = tokio::net::TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel();
        let task = tokio::spawn(async move {
            let server = axum::serve(listener, app).with_graceful_shutdown(async {
                let _ = rx.await;
            });
            if let Err(e) = server.await {
                log::error!("mock server: {e}");
            }
        });
        Ok(MockServer {
            addr,
            log,
            shutdown: Some(tx),
            task,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> Url {
        Url::parse(&format!("http://{}", self.addr)).expect("valid url")
    }

    pub fn requests(&self) -> Vec<LoggedRequest> {
        self.log.lock().expect("log lock").clone()
    }

    /// Run until the process is stopped (used by the CLI).
    pub async fn wait(self) {
        let _ = self.task.await;
    }

    pub async fn stop(self) {
        if let Some(tx) = self.shutdown {
            let _ = tx.send(());
        }
        let _ = self.task.await;
    }
}

async fn record(State(state): State<AppState>, req: Request, next: Next) -> Response {
    let path = req.uri().path().to_string();
    let start = state.epoch.elapsed();
    tokio::time::sleep(state.latency).await;
    let resp = next.run(req).await;
    let end = state.epoch.elapsed();
    state.log.lock().expect("log lock").push(LoggedRequest {
        path,
        time: LogEntry {
            start_us: start.as_micros() as u64,
            end_us: end.as_micros() as u64,
        },
    });
    resp
}

async fn request_log(State(state): State<AppState>) -> Json<Vec<LoggedRequest>> {
    Json(state.log.lock().expect("log lock").clone())
}

fn failure() -> Response {
    (StatusCode::INTERNAL_SERVER_ERROR, "fixture failure").into_response()
}

async fn api_channel(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.store.get(&id) {
        Some(f) if f.fail => failure(),
        Some(f) => match &f.channel {
            Some(c) => Json(c).into_response(),
            None => (StatusCode::NOT_FOUND, Json(serde_json::json!({"error": "not found"})))
                .into_response(),
        },
        None => (StatusCode::NOT_FOUND, Json(serde_json::json!({"error": "not found"})))
            .into_response(),
    }
}

async fn api_posts(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Response {
    let limit = q.get("limit").and_then(|l| l.parse().ok()).unwrap_or(usize::MAX);
    match state.store.get(&id) {
        Some(f) if f.fail => failure(),
        Some(f) => match &f.posts {
            Some(posts) => {
                Json(serde_json::json!({ "posts": newest_posts(posts, limit) })).into_response()
            }
            None => StatusCode::NOT_FOUND.into_response(),
        },
        None => StatusCode::NOT_FOUND.into_response(),
    }
}

async fn channel_page(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let html = match state.store.get(&id) {
        Some(f) if f.fail => return failure(),
        Some(f) => f.html(&id),
        None => crate::fixtures::removal_page(crate::fixtures::removal_message(
            audit_core::corpus::RemovalReason::ChannelAbsent,
        )),
    };
    ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], html).into_response()
}

/// Observed request schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub requests: usize,
    /// Smallest gap between consecutive request arrivals.
    pub min_gap_us: Option<u64>,
    /// Largest number of requests in flight at once.
    pub max_in_flight: usize,
    /// First arrival to last completion.
    pub span_us: u64,
}

impl Schedule {
    pub fn of(log: &[LoggedRequest]) -> Self {
        let mut starts: Vec<u64> = log.iter().map(|r| r.time.start_us).collect();
        starts.sort_unstable();
        let min_gap_us = starts.windows(2).map(|w| w[1] - w[0]).min();
        // Sweep: ends sort before starts at the same instant.
        let mut events: Vec<(u64, i32)> = log
            .iter()
            .flat_map(|r| [(r.time.start_us, 1), (r.time.end_us, -1)])
            .collect();
        events.sort_by_key(|&(t, d)| (t, d));
        let (mut cur, mut max) = (0i32, 0i32);
        for (_, d) in events {
            cur += d;
            max = max.max(cur);
        }
        let span_us = match (starts.first(), log.iter().map(|r| r.time.end_us).max()) {
            (Some(&a), Some(b)) => b - a,
            _ => 0,
        };
        Schedule {
            requests: log.len(),
            min_gap_us,
            max_in_flight: max as usize,
            span_us,
        }
    }

    /// Violations of `policy`, if any.
    pub fn violations(&self, policy: &FetchPolicy) -> Vec<String> {
        let mut out = Vec::new();
        let min = policy.min_inter_request_delay.as_micros() as u64;
        if let Some(gap) = self.min_gap_us.filter(|&g| g < min) {
            out.push(format!("gap of {gap} us is below the {min} us minimum"));
        }
        if self.max_in_flight > policy.max_concurrent_requests {
            out.push(format!(
                "{} requests in flight, bound is {}",
                self.max_in_flight, policy.max_concurrent_requests
            ));
        }
        out
    }
}
