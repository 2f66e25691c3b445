use std::path::Path;
use std::process::{Command, Output};
use std::time::Duration;

use audit_collector::mock::MockServer;
use audit_collector::FixtureStore;
use audit_core::corpus::{load_corpus, Format, RemovalReason};
use audit_core::learners::{EvalReport, RankedChannel, TrainedModel};
use audit_core::synth::{generate, SynthConfig};
use serde_json::Value;

fn audit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_audit"))
        .args(args)
        .output()
        .expect("run audit")
}

fn ok(args: &[&str]) -> String {
    let out = audit(args);
    assert!(
        out.status.success(),
        "audit {}\n{}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn corpus_to_ranked_channels() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    ok(&["synth", "--channels", "120", "--seed", "3", "--out", s(&d("raw.jsonl"))]);
    let stdout = ok(&[
        "ingest",
        "--in",
        s(&d("raw.jsonl")),
        "--out",
        s(&d("corpus.jsonl")),
        "--labels-out",
        s(&d("labels.csv")),
    ]);
    assert!(stdout.starts_with("120 channels"), "{stdout}");
    let labels = std::fs::read_to_string(d("labels.csv")).unwrap();
    assert!(labels.lines().count() >= 100);

    ok(&["sentiment", "--corpus", s(&d("corpus.jsonl")), "--out", s(&d("sent.jsonl"))]);
    let sent = std::fs::read_to_string(d("sent.jsonl")).unwrap();
    assert_eq!(sent.lines().count(), 120);
    let first: Value = serde_json::from_str(sent.lines().next().unwrap()).unwrap();
    assert!(first.get("channel_id").is_some());

    ok(&["features", "--corpus", s(&d("corpus.jsonl")), "--out", s(&d("m.csv"))]);
    assert!(d("m.json").exists(), "pipeline sidecar");

    ok(&["train", "--matrix", s(&d("m.csv")), "--kind", "lr", "--out", s(&d("model.json"))]);
    let model = TrainedModel::load(&d("model.json")).unwrap();
    assert!(model.pipeline.is_some());
    assert!(model.meta.trained_at.is_some());

    ok(&[
        "rank",
        "--model",
        s(&d("model.json")),
        "--corpus",
        s(&d("corpus.jsonl")),
        "--out",
        s(&d("ranked.json")),
    ]);
    let ranked: Vec<RankedChannel> =
        serde_json::from_str(&std::fs::read_to_string(d("ranked.json")).unwrap()).unwrap();
    assert_eq!(ranked.len(), 120);
    assert!(ranked.windows(2).all(|w| w[0].score >= w[1].score));

    ok(&["rank", "--matrix", s(&d("m.csv")), "--folds", "3", "--out", s(&d("ig.json"))]);
    let ig = json(&d("ig.json"));
    let gains: Vec<f64> = ig
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["mean_info_gain"].as_f64().unwrap())
        .collect();
    assert!(gains.windows(2).all(|w| w[0] >= w[1]));

    ok(&[
        "eval",
        "--matrix",
        s(&d("m.csv")),
        "--kind",
        "nb",
        "--folds",
        "3",
        "--out",
        s(&d("eval.json")),
    ]);
    let report: EvalReport = serde_json::from_str(&std::fs::read_to_string(d("eval.json")).unwrap()).unwrap();
    assert_eq!(report.folds, 3);
    assert!((0.0..=1.0).contains(&report.auc));
}

#[test]
fn stats_from_corpus_and_matrix_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    ok(&["synth", "--channels", "80", "--seed", "5", "--out", s(&d("c.jsonl"))]);
    ok(&["features", "--corpus", s(&d("c.jsonl")), "--out", s(&d("m.csv"))]);
    ok(&[
        "stats",
        "--corpus",
        s(&d("c.jsonl")),
        "--report",
        s(&d("ks_c.json")),
        "--ecdf-dir",
        s(&d("ecdf")),
    ]);
    ok(&["stats", "--matrix", s(&d("m.csv")), "--report", s(&d("ks_m.json"))]);
    assert!(d("ecdf").join("ecdf_videoCount.json").exists());

    let rows = |p: &Path| {
        json(p)["rows"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| (r["feature"].as_str().unwrap().to_string(), r["d_statistic"].as_f64().unwrap()))
            .collect::<Vec<_>>()
    };
    let from_corpus = rows(&d("ks_c.json"));
    // The log transform in the matrix is monotone, so D is unchanged.
    for (feature, dm) in rows(&d("ks_m.json")) {
        let dc = from_corpus.iter().find(|(f, _)| *f == feature).unwrap().1;
        assert!((dc - dm).abs() < 1e-12, "{feature}: {dc} vs {dm}");
    }
}

#[test]
fn csv_bundle_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("bundle");
    std::fs::create_dir(&bundle).unwrap();
    std::fs::write(
        bundle.join("channels.csv"),
        "channel_id,published_at,view_count,video_count,subscriber_count,subscription_count,\
         post_count,links_count,hidden_subscribers,description\n\
         UCa,2016-01-02,100,3,10,1,0,2,false,hello\n\
         UCb,2017-05-06,50,2,,0,4,0,true,\n",
    )
    .unwrap();
    std::fs::write(
        bundle.join("videos.csv"),
        "video_id,channel_id,label\nv1,UCa,suitable\nv2,UCb,disturbing\nv3,UCb,restricted\n",
    )
    .unwrap();
    let out = dir.path().join("c.jsonl");
    ok(&["ingest", "--in", s(&bundle), "--format", "csv", "--out", s(&out)]);
    let corpus = load_corpus(&out, Format::Jsonl).unwrap();
    assert_eq!(corpus.len(), 2);
    assert_eq!(corpus.videos().len(), 3);
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"channel_id\": 3}\n").unwrap();
    let out = audit(&["ingest", "--in", s(&bad), "--out", s(&dir.path().join("o.jsonl"))]);
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    // Neither --matrix nor --model.
    assert!(!audit(&["rank", "--out", "x.json"]).status.success());
}

#[test]
fn crawl_requires_consent_for_remote_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let ids = dir.path().join("ids.txt");
    std::fs::write(&ids, "UCx\n").unwrap();
    let out = audit(&[
        "crawl",
        "--ids",
        s(&ids),
        "--endpoint",
        "https://www.youtube.com",
        "--out",
        s(&dir.path().join("c.jsonl")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("i-understand-tos"));
}

#[test]
fn crawl_against_mock_server() {
    let corpus = generate(&SynthConfig {
        channels: 12,
        seed: 9,
        ..Default::default()
    });
    let store = FixtureStore::from_corpus(&corpus);
    let dir = tempfile::tempdir().unwrap();
    let ids = dir.path().join("ids.txt");
    let listed: Vec<&str> = store.ids().collect();
    std::fs::write(&ids, listed.join("\n") + "\nUCmissing\n").unwrap();

    let rt = tokio::runtime::Runtime::new().unwrap();
    let server = rt.block_on(MockServer::start(store, Duration::ZERO)).unwrap();
    let url = server.url().to_string();
    let out = dir.path().join("crawled.jsonl");
    let report = dir.path().join("report.json");
    ok(&[
        "crawl",
        "--ids",
        s(&ids),
        "--endpoint",
        &url,
        "--delay-ms",
        "2",
        "--settle-ms",
        "1",
        "--out",
        s(&out),
        "--report",
        s(&report),
    ]);
    rt.block_on(server.stop());

    let crawled = load_corpus(&out, Format::Jsonl).unwrap();
    // An unknown id is kept as an absent channel, not dropped.
    assert_eq!(crawled.len(), 13);
    let gone = crawled.channel("UCmissing").unwrap();
    assert_eq!(gone.status.reason, RemovalReason::ChannelAbsent);
    for c in corpus.channels() {
        assert_eq!(crawled.channel(&c.channel_id).unwrap().video_count, c.video_count);
    }
    let summary = json(&report);
    assert_eq!(summary["requested"], 13);
    assert_eq!(summary["fetched"], 13);
    assert!(summary["failures"].as_array().unwrap().is_empty());
}

#[test]
fn mock_server_subcommand_serves_a_corpus() {
    use std::io::{BufRead, BufReader};
    use std::process::Stdio;

    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    ok(&["synth", "--channels", "6", "--seed", "2", "--out", s(&d("c.jsonl"))]);
    let mut child = Command::new(env!("CARGO_BIN_EXE_audit"))
        .args(["mock-server", "--corpus", s(&d("c.jsonl")), "--port", "0", "--ids-out", s(&d("ids.txt"))])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let url = line.trim().rsplit(' ').next().unwrap().to_string();
    assert!(url.starts_with("http://127.0.0.1:"), "{line}");

    let crawled = ok(&[
        "crawl", "--ids", s(&d("ids.txt")), "--endpoint", &url, "--delay-ms", "1", "--settle-ms", "1",
        "--out", s(&d("out.jsonl")),
    ]);
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(crawled.starts_with("6 of 6 channels fetched"), "{crawled}");
}
