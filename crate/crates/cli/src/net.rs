use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use audit_collector::mock::MockServer;
use audit_collector::{crawl as run_crawl, Client, Endpoint, FetchPolicy, FixtureStore, StatusRules};
use audit_core::corpus::save_corpus;
use audit_service::{AppState, Config};

use crate::data::open_corpus;
use crate::CrawlArgs;

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn read_ids(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

pub fn crawl(args: CrawlArgs) -> Result<()> {
    let ids = read_ids(&args.ids)?;
    let policy = FetchPolicy {
        max_concurrent_requests: args.concurrency,
        min_inter_request_delay: Duration::from_millis(args.delay_ms),
        page_settle_delay: Duration::from_millis(args.settle_ms),
        retries: args.retries,
    };
    let rules = match &args.rules {
        Some(p) => StatusRules::load(p)?,
        None => StatusRules::bundled().clone(),
    };
    let endpoint = Endpoint::parse(&args.endpoint)?;
    let client = Arc::new(Client::new(endpoint, policy, rules, args.i_understand_tos)?);
    let report = runtime()?.block_on(run_crawl(client, &ids, args.post_limit));
    save_corpus(&report.corpus, &args.out)?;
    let summary = report.summary(ids.len());
    println!(
        "{} of {} channels fetched, {} failed, {} with zero-filled fields",
        summary.fetched,
        summary.requested,
        summary.failures.len(),
        summary.missing_fields.len()
    );
    for f in &summary.failures {
        eprintln!("  {}: {}", f.channel_id, f.error);
    }
    if let Some(p) = &args.report {
        std::fs::write(p, serde_json::to_string_pretty(&summary)?)?;
    }
    Ok(())
}

async fn ctrl_c() {
    if let Err(e) = tokio::signal::ctrl_c().await {
        log::error!("cannot listen for ctrl-c: {e}");
        std::future::pending::<()>().await;
    }
}

pub fn serve(config: &Path) -> Result<()> {
    let cfg = Config::load(config)?;
    let addr = cfg.addr();
    let state = AppState::open(cfg)?;
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        println!("serving /v1 on http://{}", listener.local_addr()?);
        audit_service::serve(listener, state, ctrl_c()).await?;
        Ok(())
    })
}

pub fn mock_server(
    fixtures: Option<&Path>,
    corpus: Option<&Path>,
    port: u16,
    latency_ms: u64,
    ids_out: Option<&Path>,
) -> Result<()> {
    let store = match (fixtures, corpus) {
        (Some(dir), _) => FixtureStore::load_dir(dir)?,
        (None, Some(c)) => FixtureStore::from_corpus(&open_corpus(c)?),
        (None, None) => bail!("give --fixtures or --corpus"),
    };
    if let Some(p) = ids_out {
        let ids: Vec<&str> = store.ids().collect();
        std::fs::write(p, ids.join("\n") + "\n")?;
    }
    let channels = store.len();
    runtime()?.block_on(async move {
        let addr = std::net::SocketAddr::from(([127, 0, 0, 1], port));
        let server = MockServer::bind(addr, store, Duration::from_millis(latency_ms)).await?;
        println!("mock API for {channels} channels on {}", server.url());
        ctrl_c().await;
        server.stop().await;
        Ok(())
    })
}
