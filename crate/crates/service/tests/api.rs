use std::sync::mpsc;
use std::sync::Arc;
use std::time::Duration;

use audit_core::corpus::{propagate_labels, Corpus};
use audit_core::features::{labeled_inputs, prepare_inputs, FeaturePipeline, FeatureSpec};
use audit_core::learners::{rank_channels, train, Hyperparams, ModelKind, TrainedModel};
use audit_core::synth::{generate, SynthConfig};
use audit_core::textlytics::TextAnalyzer;
use audit_service::{
    router, AppState, ChannelDetail, Config, DefaultTrainer, JobInfo, JobState, ModelStatus,
    QueuePage, Subscribers, TrainRequest, Trained, Trainer,
};
use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use tempfile::TempDir;
use tower::ServiceExt;

fn corpus() -> Corpus {
    generate(&SynthConfig {
        channels: 60,
        ..Default::default()
    })
}

fn fit_model(corpus: &Corpus) -> TrainedModel {
    let inputs = prepare_inputs(corpus, &TextAnalyzer::bundled()).unwrap();
    let (inputs, classes) = labeled_inputs(inputs, &propagate_labels(corpus));
    let pipeline = FeaturePipeline::fit(FeatureSpec::default(), &inputs).unwrap();
    let rows: Vec<Vec<f64>> = inputs.iter().map(|i| pipeline.transform(i)).collect();
    train(
        ModelKind::LogisticRegression,
        &pipeline.names,
        &rows,
        &classes,
        &Hyperparams::default(),
        7,
    )
    .unwrap()
    .with_pipeline(pipeline)
    .unwrap()
}

fn config(dir: &TempDir) -> Config {
    Config {
        model: dir.path().join("model.json"),
        store: dir.path().join("decisions"),
        retrain_folds: 3,
        ..Default::default()
    }
}

struct Fixture {
    dir: TempDir,
    corpus: Corpus,
    model: TrainedModel,
}

impl Fixture {
    fn new() -> Self {
        let corpus = corpus();
        let model = fit_model(&corpus);
        Fixture {
            dir: tempfile::tempdir().unwrap(),
            corpus,
            model,
        }
    }

    fn state_with(&self, cfg: Config, trainer: Box<dyn Trainer>) -> Arc<AppState> {
        AppState::new(cfg, self.corpus.clone(), Some(self.model.clone()), trainer).unwrap()
    }

    fn state(&self) -> Arc<AppState> {
        self.state_with(config(&self.dir), Box::new(DefaultTrainer))
    }
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, headers, body)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post_json(app: &Router, uri: &str, body: &str) -> (StatusCode, Vec<u8>) {
    let req = Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (s, _, b) = call(app, req).await;
    (s, b)
}

async fn decide(app: &Router, id: &str, decision: &str, moderator: &str) -> StatusCode {
    let body = format!(r#"{{"decision":"{decision}","moderator_id":"{moderator}"}}"#);
    post_json(app, &format!("/v1/channels/{id}/decision"), &body).await.0
}

fn json<T: serde::de::DeserializeOwned>(body: &[u8]) -> T {
    serde_json::from_slice(body).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(body));
    })
}

async fn wait_for_job(app: &Router, id: u64) -> JobInfo {
    for _ in 0..600 {
        let (s, _, b) = get(app, &format!("/v1/jobs/{id}")).await;
        assert_eq!(s, StatusCode::OK);
        let job: JobInfo = json(&b);
        if job.state != JobState::Running {
            return job;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("job {id} did not finish");
}

fn ids(page: &QueuePage) -> Vec<String> {
    page.entries.iter().map(|e| e.channel_id.clone()).collect()
}

#[tokio::test]
async fn queue_order_equals_rank_channels() {
    let f = Fixture::new();
    let state = f.state();
    let app = router(state.clone());
    let expected = rank_channels(&f.model, &state.inputs, state.config.severity, None).unwrap();

    let mut got = Vec::new();
    let mut offset = 0;
    loop {
        let (s, h, b) = get(&app, &format!("/v1/queue?limit=7&offset={offset}")).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(h["x-total-count"], "60");
        let page: QueuePage = json(&b);
        if page.entries.is_empty() {
            break;
        }
        for e in &page.entries {
            assert!(e.top_groups.len() <= 3);
        }
        got.extend(page.entries);
        offset += 7;
    }
    let got_ids: Vec<&str> = got.iter().map(|e| e.channel_id.as_str()).collect();
    let want_ids: Vec<&str> = expected.iter().map(|r| r.channel_id.as_str()).collect();
    assert_eq!(got_ids, want_ids);
    for (e, r) in got.iter().zip(&expected) {
        assert_eq!(e.probability, r.probability);
        assert_eq!(e.rank, got_ids.iter().position(|i| *i == r.channel_id).unwrap() + 1);
    }
    assert!(got.windows(2).all(|w| w[0].severity >= w[1].severity));
}

#[tokio::test]
async fn queue_paging_and_filters() {
    let f = Fixture::new();
    let app = router(f.state());

    let (_, _, b) = get(&app, "/v1/queue?limit=1000").await;
    let all: QueuePage = json(&b);
    let (_, _, b) = get(&app, "/v1/queue?limit=2").await;
    let first: QueuePage = json(&b);
    assert_eq!(ids(&first), ids(&all)[..2]);

    let (s, h, b) = get(&app, "/v1/queue?offset=500").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(h["x-total-count"], "60");
    assert!(json::<QueuePage>(&b).entries.is_empty());

    for bad in ["/v1/queue?limit=0", "/v1/queue?limit=x", "/v1/queue?filter=odd", "/v1/queue?sort=1"] {
        assert_eq!(get(&app, bad).await.0, StatusCode::BAD_REQUEST, "{bad}");
    }

    let top = &all.entries[0].channel_id;
    assert_eq!(decide(&app, top, "confirm_disturbing", "m1").await, StatusCode::CREATED);
    let (_, h, b) = get(&app, "/v1/queue?filter=decided").await;
    assert_eq!(h["x-total-count"], "1");
    let decided: QueuePage = json(&b);
    assert_eq!(decided.entries[0].decision_state, "confirm_disturbing");
    assert_eq!(decided.entries[0].rank, 1);
    let (_, h, _) = get(&app, "/v1/queue?filter=undecided").await;
    assert_eq!(h["x-total-count"], "59");

    // Fully decided set: nothing left undecided.
    for e in &all.entries[1..] {
        decide(&app, &e.channel_id, "needs_more_review", "m2").await;
    }
    let (s, h, b) = get(&app, "/v1/queue?filter=undecided").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(h["x-total-count"], "0");
    assert!(json::<QueuePage>(&b).entries.is_empty());
    let (_, h, _) = get(&app, "/v1/queue?filter=needs_more_review").await;
    assert_eq!(h["x-total-count"], "59");
}

#[tokio::test]
async fn no_model_means_no_queue() {
    let f = Fixture::new();
    let state = AppState::new(config(&f.dir), f.corpus.clone(), None, Box::new(DefaultTrainer)).unwrap();
    let app = router(state);
    let (s, _, b) = get(&app, "/v1/queue").await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert!(String::from_utf8_lossy(&b).contains("retrain"));
    let id = &f.corpus.channels()[0].channel_id;
    let (s, _, b) = get(&app, &format!("/v1/channels/{id}")).await;
    assert_eq!(s, StatusCode::OK);
    assert!(json::<ChannelDetail>(&b).scoring.is_none());
    let (_, _, b) = get(&app, "/v1/model").await;
    assert!(json::<ModelStatus>(&b).serving.is_none());
}

#[tokio::test]
async fn channel_detail_matches_feature_matrix() {
    let f = Fixture::new();
    let state = f.state();
    let app = router(state.clone());
    let pipeline = f.model.pipeline.as_ref().unwrap();
    let matrix = pipeline.matrix(&state.inputs, &state.base_labels);

    let id = &f.corpus.channels()[3].channel_id;
    let (s, _, b) = get(&app, &format!("/v1/channels/{id}")).await;
    assert_eq!(s, StatusCode::OK);
    let detail: ChannelDetail = json(&b);
    let scoring = detail.scoring.unwrap();
    let row = matrix.channel_ids.iter().position(|c| c == id).unwrap();
    let names: Vec<&str> = scoring.features.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(names, matrix.names.iter().map(String::as_str).collect::<Vec<_>>());
    let values: Vec<f64> = scoring.features.iter().map(|f| f.value).collect();
    assert_eq!(values, matrix.rows[row]);
    assert_eq!(detail.label.map(|l| l.value), state.base_labels.get(id).map(|l| l.value));

    assert_eq!(get(&app, "/v1/channels/nope").await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn hidden_subscribers_are_marked_hidden() {
    let f = Fixture::new();
    let app = router(f.state());
    let hidden = f
        .corpus
        .channels()
        .iter()
        .find(|c| c.hidden_subscribers)
        .expect("generator hides some subscriber counts");
    let (_, _, b) = get(&app, &format!("/v1/channels/{}", hidden.channel_id)).await;
    let detail: ChannelDetail = json(&b);
    assert_eq!(detail.subscribers, Subscribers::Hidden);
    assert_eq!(detail.record.subscriber_count, None);
    let body: serde_json::Value = json(&b);
    assert_eq!(body["subscribers"]["state"], "hidden");

    let visible = f.corpus.channels().iter().find(|c| !c.hidden_subscribers).unwrap();
    let (_, _, b) = get(&app, &format!("/v1/channels/{}", visible.channel_id)).await;
    assert_eq!(
        json::<ChannelDetail>(&b).subscribers,
        Subscribers::Visible {
            count: visible.subscriber_count.unwrap()
        }
    );
}

#[tokio::test]
async fn decisions_create_replace_and_export() {
    let f = Fixture::new();
    let app = router(f.state());
    let a = f.corpus.channels()[0].channel_id.clone();
    let b = f.corpus.channels()[1].channel_id.clone();

    assert_eq!(decide(&app, &a, "confirm_disturbing", "m1").await, StatusCode::CREATED);
    assert_eq!(decide(&app, &a, "confirm_suitable", "m1").await, StatusCode::OK);
    assert_eq!(decide(&app, &b, "confirm_disturbing", "m1").await, StatusCode::CREATED);
    assert_eq!(decide(&app, &b, "needs_more_review", "m2").await, StatusCode::CREATED);
    assert_eq!(decide(&app, "ghost", "confirm_suitable", "m1").await, StatusCode::NOT_FOUND);

    let uri = format!("/v1/channels/{a}/decision");
    for bad in [
        "not json",
        r#"{"decision":"ban","moderator_id":"m1"}"#,
        r#"{"decision":"confirm_suitable"}"#,
        r#"{"decision":"confirm_suitable","moderator_id":"  "}"#,
        r#"{"decision":"confirm_suitable","moderator_id":"m1","extra":1}"#,
        r#"{"decision":"confirm_suitable","moderator_id":"m1","channel_id":"other"}"#,
    ] {
        assert_eq!(post_json(&app, &uri, bad).await.0, StatusCode::BAD_REQUEST, "{bad}");
    }

    let (_, _, body) = get(&app, &format!("/v1/channels/{a}")).await;
    let detail: ChannelDetail = json(&body);
    assert_eq!(detail.decisions.len(), 1);
    assert_eq!(detail.decisions[0].moderator_id, "m1");

    let (s, h, csv) = get(&app, "/v1/labels").await;
    assert_eq!(s, StatusCode::OK);
    assert!(h[header::CONTENT_TYPE].to_str().unwrap().starts_with("text/csv"));
    let exported = audit_core::corpus::read_label_file(csv.as_slice()).unwrap();
    assert_eq!(exported.len(), 2);
    assert_eq!(exported[&a].as_str(), "suitable");
    assert_eq!(exported[&b].as_str(), "disturbing");
}

#[tokio::test]
async fn decisions_survive_restart() {
    let f = Fixture::new();
    let ids: Vec<String> = f.corpus.channels()[..5].iter().map(|c| c.channel_id.clone()).collect();
    let mut cfg = config(&f.dir);
    cfg.snapshot_every = 3;
    {
        let app = router(f.state_with(cfg.clone(), Box::new(DefaultTrainer)));
        for id in &ids {
            decide(&app, id, "confirm_disturbing", "m1").await;
        }
        decide(&app, &ids[0], "confirm_suitable", "m1").await;
    }
    let state = f.state_with(cfg, Box::new(DefaultTrainer));
    let app = router(state.clone());
    let (_, _, body) = get(&app, &format!("/v1/channels/{}", ids[0])).await;
    let detail: ChannelDetail = json(&body);
    assert_eq!(detail.decisions.len(), 1);
    assert_eq!(detail.decisions[0].decision, audit_service::Decision::ConfirmSuitable);
    assert_eq!(state.store.lock().logged(), 6);
    let (_, h, _) = get(&app, "/v1/queue?filter=decided").await;
    assert_eq!(h["x-total-count"], "5");
    // A second moderator posting after restart still creates.
    assert_eq!(decide(&app, &ids[0], "confirm_suitable", "m2").await, StatusCode::CREATED);
}

#[tokio::test]
async fn retrain_needs_new_decisions_then_swaps_model() {
    let f = Fixture::new();
    let state = f.state();
    let app = router(state.clone());
    let (s, _) = post_json(&app, "/v1/retrain", "").await;
    assert_eq!(s, StatusCode::CONFLICT);

    // Flip the most suspicious channels to suitable.
    let (_, _, b) = get(&app, "/v1/queue?limit=5").await;
    let top = ids(&json::<QueuePage>(&b));
    for id in &top {
        decide(&app, id, "confirm_suitable", "m1").await;
    }
    let (_, _, b) = get(&app, "/v1/model").await;
    assert_eq!(json::<ModelStatus>(&b).new_decisions, 5);

    let (s, b) = post_json(&app, "/v1/retrain", "").await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let job_id = json::<serde_json::Value>(&b)["job_id"].as_u64().unwrap();
    let job = wait_for_job(&app, job_id).await;
    assert_eq!(job.state, JobState::Succeeded, "{:?}", job.error);
    assert_eq!(job.model_version, Some(2));
    assert_eq!(job.samples, 60);
    let report = job.report.unwrap();
    assert_eq!(report.folds, 3);
    assert!(report.probabilities.is_empty());

    let (_, h, b) = get(&app, "/v1/queue?limit=1000").await;
    assert_eq!(h["x-model-version"], "2");
    let page: QueuePage = json(&b);
    let serving = state.serving().unwrap();
    let expected = rank_channels(&serving.model, &state.inputs, state.config.severity, None).unwrap();
    let want: Vec<String> = expected.iter().map(|r| r.channel_id.clone()).collect();
    assert_eq!(ids(&page), want);

    // The new model was persisted and reflects the overrides.
    let saved = TrainedModel::load(&state.config.model).unwrap();
    assert_eq!(saved, serving.model);
    let suitable_now = saved.meta.class_counts[0];
    assert!(suitable_now >= f.model.meta.class_counts[0]);

    // Nothing new since: refused again.
    assert_eq!(post_json(&app, "/v1/retrain", "").await.0, StatusCode::CONFLICT);
    assert_eq!(get(&app, "/v1/jobs/999").await.0, StatusCode::NOT_FOUND);
}

struct Failing;

impl Trainer for Failing {
    fn train(&self, _: &TrainRequest<'_>) -> Result<Trained, String> {
        Err("injected failure".into())
    }
}

#[tokio::test]
async fn failed_retrain_keeps_serving_model() {
    let f = Fixture::new();
    let cfg = config(&f.dir);
    f.model.save(&cfg.model).unwrap();
    let before = std::fs::read(&cfg.model).unwrap();
    let state = f.state_with(cfg.clone(), Box::new(Failing));
    let app = router(state.clone());
    let (_, _, b) = get(&app, "/v1/queue?limit=1000").await;
    let page_before: QueuePage = json(&b);

    decide(&app, &f.corpus.channels()[0].channel_id, "confirm_suitable", "m1").await;
    let (s, b) = post_json(&app, "/v1/retrain", "").await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let job = wait_for_job(&app, json::<serde_json::Value>(&b)["job_id"].as_u64().unwrap()).await;
    assert_eq!(job.state, JobState::Failed);
    assert_eq!(job.error.as_deref(), Some("injected failure"));
    assert_eq!(job.model_version, None);

    let (_, _, b) = get(&app, "/v1/queue?limit=1000").await;
    let scores = |p: &QueuePage| -> Vec<(String, f64)> {
        p.entries.iter().map(|e| (e.channel_id.clone(), e.probability)).collect()
    };
    let page_after: QueuePage = json(&b);
    assert_eq!(page_after.model_version, 1);
    assert_eq!(scores(&page_after), scores(&page_before));
    assert_eq!(state.serving().unwrap().version, 1);
    assert_eq!(std::fs::read(&cfg.model).unwrap(), before);
    // The guard is released: another attempt is accepted.
    assert_eq!(post_json(&app, "/v1/retrain", "").await.0, StatusCode::ACCEPTED);
}

/// Blocks until released, then trains normally.
struct Gated(std::sync::Mutex<mpsc::Receiver<()>>);

impl Trainer for Gated {
    fn train(&self, req: &TrainRequest<'_>) -> Result<Trained, String> {
        self.0.lock().unwrap().recv().map_err(|e| e.to_string())?;
        DefaultTrainer.train(req)
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_retrain_conflicts_and_swap_is_atomic() {
    let f = Fixture::new();
    let (tx, rx) = mpsc::channel();
    let state = f.state_with(config(&f.dir), Box::new(Gated(std::sync::Mutex::new(rx))));
    let app = router(state.clone());
    for c in &f.corpus.channels()[..4] {
        decide(&app, &c.channel_id, "confirm_suitable", "m1").await;
    }
    let (s, b) = post_json(&app, "/v1/retrain", "").await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let job_id = json::<serde_json::Value>(&b)["job_id"].as_u64().unwrap();
    assert_eq!(post_json(&app, "/v1/retrain", "").await.0, StatusCode::CONFLICT);
    let (_, _, b) = get(&app, &format!("/v1/jobs/{job_id}")).await;
    assert_eq!(json::<JobInfo>(&b).state, JobState::Running);

    // Readers hammer the queue while the job finishes. Every page must be
    // one of the two complete rankings.
    let reader = {
        let app = app.clone();
        tokio::spawn(async move {
            let mut seen = std::collections::BTreeMap::<u64, QueuePage>::new();
            for _ in 0..400 {
                let (_, h, b) = get(&app, "/v1/queue?limit=1000").await;
                let page: QueuePage = json(&b);
                assert_eq!(h["x-model-version"].to_str().unwrap(), page.model_version.to_string());
                assert_eq!(page.entries.len(), 60);
                assert!(page.entries.windows(2).all(|w| w[0].severity >= w[1].severity));
                if let Some(prev) = seen.get(&page.model_version) {
                    assert_eq!(ids(prev), ids(&page));
                } else {
                    seen.insert(page.model_version, page);
                }
                if seen.contains_key(&2) {
                    break;
                }
                tokio::time::sleep(Duration::from_millis(5)).await;
            }
            seen.into_keys().collect::<Vec<_>>()
        })
    };
    tokio::time::sleep(Duration::from_millis(30)).await;
    tx.send(()).unwrap();
    let job = wait_for_job(&app, job_id).await;
    assert_eq!(job.state, JobState::Succeeded, "{:?}", job.error);
    let versions = reader.await.unwrap();
    assert!(versions.iter().all(|v| [1, 2].contains(v)), "{versions:?}");
}

#[tokio::test]
async fn bearer_token_guards_v1() {
    let f = Fixture::new();
    let cfg = Config {
        token: Some("s3cret".into()),
        ..config(&f.dir)
    };
    let app = router(f.state_with(cfg, Box::new(DefaultTrainer)));
    assert_eq!(get(&app, "/v1/health").await.0, StatusCode::OK);
    assert_eq!(get(&app, "/v1/queue").await.0, StatusCode::UNAUTHORIZED);
    let req = Request::get("/v1/queue")
        .header(header::AUTHORIZATION, "Bearer wrong")
        .body(Body::empty())
        .unwrap();
    assert_eq!(call(&app, req).await.0, StatusCode::UNAUTHORIZED);
    let req = Request::get("/v1/queue")
        .header(header::AUTHORIZATION, "Bearer s3cret")
        .body(Body::empty())
        .unwrap();
    assert_eq!(call(&app, req).await.0, StatusCode::OK);
}

#[tokio::test]
async fn open_reads_config_paths() {
    let f = Fixture::new();
    let corpus_path = f.dir.path().join("corpus.jsonl");
    audit_core::corpus::save_corpus(&f.corpus, &corpus_path).unwrap();
    let cfg = Config {
        corpus: corpus_path,
        ..config(&f.dir)
    };
    f.model.save(&cfg.model).unwrap();
    let state = AppState::open(cfg).unwrap();
    assert_eq!(state.serving().unwrap().ranking.len(), 60);
    let served = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = served.local_addr().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let task = tokio::spawn(audit_service::serve(served, state, async {
        let _ = rx.await;
    }));
    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    stream
        .write_all(b"GET /v1/health HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut resp = String::new();
    stream.read_to_string(&mut resp).await.unwrap();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    tx.send(()).unwrap();
    task.await.unwrap().unwrap();
}

#[tokio::test]
async fn retrain_bootstraps_a_missing_model() {
    let f = Fixture::new();
    let cfg = Config {
        retrain_kind: ModelKind::LogisticRegression,
        ..config(&f.dir)
    };
    let state = AppState::new(cfg.clone(), f.corpus.clone(), None, Box::new(DefaultTrainer)).unwrap();
    let app = router(state);
    decide(&app, &f.corpus.channels()[0].channel_id, "confirm_disturbing", "m1").await;
    let (s, b) = post_json(&app, "/v1/retrain", "").await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let job = wait_for_job(&app, json::<serde_json::Value>(&b)["job_id"].as_u64().unwrap()).await;
    assert_eq!(job.state, JobState::Succeeded, "{:?}", job.error);
    assert_eq!(job.model_version, Some(1));
    let (s, h, _) = get(&app, "/v1/queue").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(h["x-model-version"], "1");
    assert_eq!(TrainedModel::load(&cfg.model).unwrap().kind, ModelKind::LogisticRegression);

    // A restart picks up the saved model and its version.
    let state = AppState::open(Config {
        corpus: {
            let p = f.dir.path().join("c.jsonl");
            audit_core::corpus::save_corpus(&f.corpus, &p).unwrap();
            p
        },
        ..cfg
    })
    .unwrap();
    assert_eq!(state.serving().unwrap().version, 1);
    assert_eq!(state.new_decisions(), 0);
}
