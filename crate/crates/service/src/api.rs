use std::future::Future;
use std::sync::Arc;

use audit_core::corpus::{write_label_file, ChannelClass, ChannelLabel, RemovalReason, StatusReport};
use audit_core::features::VideoSummary;
use audit_core::learners::GroupAttribution;
use audit_core::textlytics::ChannelSentiment;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::state::{AppState, RetrainRefusal, Serving, ServingInfo};
use crate::store::{Decision, ReviewDecision, WriteOutcome};

/// Attribution groups reported per queue entry.
const TOP_GROUPS: usize = 3;
const MAX_PAGE: usize = 1000;
const MAX_NOTE: usize = 4000;

type AppRef = Arc<AppState>;

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

fn not_found(id: &str) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, format!("unknown channel {id:?}"))
}

fn no_ranking() -> ApiError {
    ApiError(
        StatusCode::CONFLICT,
        "no ranking is loaded: start the service with a trained model or POST /v1/retrain once \
         decisions exist"
            .into(),
    )
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

/// All routes under `/v1`.
pub fn router(state: AppRef) -> Router {
    let guarded = Router::new()
        .route("/queue", get(queue))
        .route("/channels/{id}", get(channel_detail))
        .route("/channels/{id}/decision", post(post_decision))
        .route("/labels", get(labels))
        .route("/model", get(model))
        .route("/retrain", post(retrain))
        .route("/jobs/{id}", get(job))
        .layer(middleware::from_fn_with_state(state.clone(), auth));
    let v1 = Router::new().route("/health", get(health)).merge(guarded);
    Router::new().nest("/v1", v1).with_state(state)
}

/// Serve until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppRef,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

async fn auth(State(state): State<AppRef>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.config.token {
        let given = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return ApiError(StatusCode::UNAUTHORIZED, "missing or wrong bearer token".into())
                .into_response();
        }
    }
    next.run(req).await
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum QueueFilter {
    #[default]
    All,
    Undecided,
    Decided,
    ConfirmDisturbing,
    ConfirmSuitable,
    NeedsMoreReview,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueueParams {
    #[serde(default = "default_limit")]
    limit: usize,
    #[serde(default)]
    offset: usize,
    #[serde(default)]
    filter: QueueFilter,
}

fn default_limit() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusSummary {
    pub available: bool,
    pub reason: RemovalReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueEntry {
    /// Position in the full ranking, starting at 1.
    pub rank: usize,
    pub channel_id: String,
    pub severity: f64,
    pub probability: f64,
    pub top_groups: Vec<GroupAttribution>,
    pub status: StatusSummary,
    /// Latest decision on the channel, or `undecided`.
    pub decision_state: String,
    pub decisions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueuePage {
    pub model_version: u64,
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub entries: Vec<QueueEntry>,
}

fn decision_name(d: Decision) -> &'static str {
    match d {
        Decision::ConfirmDisturbing => "confirm_disturbing",
        Decision::ConfirmSuitable => "confirm_suitable",
        Decision::NeedsMoreReview => "needs_more_review",
    }
}

async fn queue(
    State(state): State<AppRef>,
    params: Result<Query<QueueParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(p) = params.map_err(|e| bad_request(e.body_text()))?;
    if p.limit == 0 || p.limit > MAX_PAGE {
        return Err(bad_request(format!("limit must be between 1 and {MAX_PAGE}")));
    }
    let serving = state.serving().ok_or_else(no_ranking)?;
    let (latest, per_channel) = {
        let store = state.store.lock();
        let latest = store.latest_by_channel();
        let mut per_channel = std::collections::HashMap::<String, usize>::new();
        for d in store.active() {
            *per_channel.entry(d.channel_id.clone()).or_default() += 1;
        }
        (latest, per_channel)
    };
    let keep = |id: &str| {
        let d = latest.get(id).map(|d| d.decision);
        match p.filter {
            QueueFilter::All => true,
            QueueFilter::Undecided => d.is_none(),
            QueueFilter::Decided => d.is_some(),
            QueueFilter::ConfirmDisturbing => d == Some(Decision::ConfirmDisturbing),
            QueueFilter::ConfirmSuitable => d == Some(Decision::ConfirmSuitable),
            QueueFilter::NeedsMoreReview => d == Some(Decision::NeedsMoreReview),
        }
    };
    let matching: Vec<(usize, &audit_core::learners::RankedChannel)> = serving
        .ranking
        .iter()
        .enumerate()
        .filter(|(_, r)| keep(&r.channel_id))
        .collect();
    let total = matching.len();
    let entries = matching
        .into_iter()
        .skip(p.offset)
        .take(p.limit)
        .map(|(i, r)| {
            let status = &state.channel(&r.channel_id).expect("ranked channels exist").record.status;
            QueueEntry {
                rank: i + 1,
                channel_id: r.channel_id.clone(),
                severity: r.score,
                probability: r.probability,
                top_groups: r.attributions.iter().take(TOP_GROUPS).cloned().collect(),
                status: StatusSummary {
                    available: status.available,
                    reason: status.reason,
                },
                decision_state: latest
                    .get(&r.channel_id)
                    .map_or("undecided", |d| decision_name(d.decision))
                    .to_string(),
                decisions: per_channel.get(&r.channel_id).copied().unwrap_or(0),
            }
        })
        .collect();
    let page = QueuePage {
        model_version: serving.version,
        total,
        offset: p.offset,
        limit: p.limit,
        entries,
    };
    let mut headers = HeaderMap::new();
    headers.insert("x-total-count", HeaderValue::from(total));
    headers.insert("x-model-version", HeaderValue::from(serving.version));
    Ok((headers, Json(page)).into_response())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Subscribers {
    Hidden,
    Visible { count: u64 },
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureValue {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scoring {
    pub model_version: u64,
    pub rank: usize,
    pub severity: f64,
    pub probability: f64,
    pub attributions: Vec<GroupAttribution>,
    pub features: Vec<FeatureValue>,
    pub missing_fields: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDetail {
    pub channel_id: String,
    pub record: audit_core::corpus::ChannelRecord,
    pub subscribers: Subscribers,
    pub status: StatusReport,
    pub label: Option<ChannelLabel>,
    pub videos: VideoSummary,
    pub sentiment: ChannelSentiment,
    /// Absent while no model is loaded.
    pub scoring: Option<Scoring>,
    pub decisions: Vec<ReviewDecision>,
}

fn scoring(serving: &Serving, input: &audit_core::features::ChannelInputs) -> Option<Scoring> {
    let &pos = serving.position.get(&input.record.channel_id)?;
    let ranked = &serving.ranking[pos];
    let pipeline = serving.model.pipeline.as_ref()?;
    let features = pipeline
        .names
        .iter()
        .zip(pipeline.transform(input))
        .map(|(name, value)| FeatureValue {
            name: name.clone(),
            value,
        })
        .collect();
    Some(Scoring {
        model_version: serving.version,
        rank: pos + 1,
        severity: ranked.score,
        probability: ranked.probability,
        attributions: ranked.attributions.clone(),
        features,
        missing_fields: ranked.missing_fields.clone(),
    })
}

async fn channel_detail(
    State(state): State<AppRef>,
    Path(id): Path<String>,
) -> Result<Json<ChannelDetail>, ApiError> {
    let input = state.channel(&id).ok_or_else(|| not_found(&id))?;
    let rec = &input.record;
    let subscribers = match (rec.hidden_subscribers, rec.subscriber_count) {
        (true, _) => Subscribers::Hidden,
        (false, Some(count)) => Subscribers::Visible { count },
        (false, None) => Subscribers::Unknown,
    };
    Ok(Json(ChannelDetail {
        channel_id: id.clone(),
        record: rec.clone(),
        subscribers,
        status: rec.status.clone(),
        label: state.base_labels.get(&id).copied(),
        videos: input.videos,
        sentiment: input.sentiment.clone(),
        scoring: state.serving().and_then(|s| scoring(&s, input)),
        decisions: state.store.lock().for_channel(&id),
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionBody {
    /// Optional; must match the path when given.
    channel_id: Option<String>,
    decision: Decision,
    moderator_id: String,
    note: Option<String>,
}

async fn post_decision(
    State(state): State<AppRef>,
    Path(id): Path<String>,
    body: Result<Json<DecisionBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    if state.channel(&id).is_none() {
        return Err(not_found(&id));
    }
    let Json(body) = body.map_err(|e| bad_request(e.body_text()))?;
    if body.channel_id.as_deref().is_some_and(|c| c != id) {
        return Err(bad_request("channel_id in the body differs from the path"));
    }
    let moderator = body.moderator_id.trim();
    if moderator.is_empty() || moderator.len() > 128 {
        return Err(bad_request("moderator_id must be 1 to 128 characters"));
    }
    if body.note.as_ref().is_some_and(|n| n.len() > MAX_NOTE) {
        return Err(bad_request(format!("note exceeds {MAX_NOTE} bytes")));
    }
    let moderator = moderator.to_string();
    let writer = state.clone();
    let (stored, outcome) = tokio::task::spawn_blocking(move || {
        writer.store.lock().record(&id, &moderator, body.decision, body.note)
    })
    .await
    .map_err(internal)?
    .map_err(internal)?;
    let code = match outcome {
        WriteOutcome::Created => StatusCode::CREATED,
        WriteOutcome::Replaced => StatusCode::OK,
    };
    Ok((code, Json(stored)).into_response())
}

/// Confirmed decisions as a `channel_id,label` file.
async fn labels(State(state): State<AppRef>) -> Result<Response, ApiError> {
    let confirmed: std::collections::BTreeMap<String, ChannelClass> =
        state.store.lock().confirmed_labels();
    let mut buf = Vec::new();
    write_label_file(&confirmed, &mut buf).map_err(internal)?;
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8"),
            (header::CONTENT_DISPOSITION, "attachment; filename=\"labels.csv\""),
        ],
        buf,
    )
        .into_response())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelStatus {
    pub serving: Option<ServingInfo>,
    pub new_decisions: usize,
    pub retrain_min_decisions: usize,
}

async fn model(State(state): State<AppRef>) -> Json<ModelStatus> {
    Json(ModelStatus {
        serving: state.serving().map(|s| s.info()),
        new_decisions: state.new_decisions(),
        retrain_min_decisions: state.config.retrain_min_decisions,
    })
}

async fn retrain(State(state): State<AppRef>) -> Result<Response, ApiError> {
    let job = state.begin_retrain().map_err(|r| match r {
        RetrainRefusal::Running => {
            ApiError(StatusCode::CONFLICT, "a retrain job is already running".into())
        }
        RetrainRefusal::TooFewDecisions { new, needed } => ApiError(
            StatusCode::CONFLICT,
            format!("{new} new decisions since the last training; {needed} needed"),
        ),
    })?;
    let worker = state.clone();
    let handle = tokio::task::spawn_blocking(move || worker.run_retrain(job));
    tokio::spawn(async move {
        if let Err(e) = handle.await {
            state.abort_retrain(job, format!("retrain task died: {e}"));
        }
    });
    Ok((
        StatusCode::ACCEPTED,
        [(header::LOCATION, format!("/v1/jobs/{job}"))],
        Json(serde_json::json!({ "job_id": job })),
    )
        .into_response())
}

async fn job(
    State(state): State<AppRef>,
    Path(id): Path<String>,
) -> Result<Json<crate::state::JobInfo>, ApiError> {
    let missing = || ApiError(StatusCode::NOT_FOUND, format!("unknown job {id:?}"));
    let n: u64 = id.parse().map_err(|_| missing())?;
    state.job(n).map(Json).ok_or_else(missing)
}
