use std::collections::{BTreeMap, HashSet, VecDeque};
use std::sync::{Arc, Mutex};

use audit_core::corpus::{ChannelRecord, Corpus};
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc;

use crate::client::Client;
use crate::CollectorError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrawlFailure {
    pub channel_id: String,
    pub error: String,
}

/// Result of a crawl: every channel that could be fetched, in input order,
/// plus what went wrong with the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct CrawlReport {
    pub corpus: Corpus,
    pub failures: Vec<CrawlFailure>,
    /// Count fields the source omitted, per channel, which were stored as 0.
    pub missing_fields: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureSummary {
    pub requested: usize,
    pub fetched: usize,
    pub failures: Vec<CrawlFailure>,
    pub missing_fields: BTreeMap<String, Vec<String>>,
}

impl CrawlReport {
    pub fn summary(&self, requested: usize) -> FailureSummary {
        FailureSummary {
            requested,
            fetched: self.corpus.len(),
            failures: self.failures.clone(),
            missing_fields: self.missing_fields.clone(),
        }
    }
}

async fn fetch_one(
    client: &Client,
    id: &str,
    post_limit: usize,
) -> Result<(ChannelRecord, Vec<String>), CollectorError> {
    let partial = client.fetch_channel(id).await?;
    let (mut record, missing) = partial.into_record();
    if record.status.available {
        record.posts = client.fetch_posts(id, post_limit).await?;
        if record.post_count == 0 {
            record.post_count = record.posts.len() as u64;
        }
    }
    record.check().map_err(|message| CollectorError::Payload {
        channel_id: id.to_string(),
        message,
    })?;
    Ok((record, missing))
}

/// Crawl channel ids with a pool of `max_concurrent_requests` workers. The
/// client's limiter is the only shared state; results flow to one
/// aggregator and are reordered to match the input. Duplicate ids are
/// fetched once.
pub async fn crawl(client: Arc<Client>, ids: &[String], post_limit: usize) -> CrawlReport {
    let mut seen = HashSet::new();
    let unique: Vec<String> = ids.iter().filter(|id| seen.insert(id.as_str())).cloned().collect();
    let queue = Arc::new(Mutex::new(unique.iter().cloned().enumerate().collect::<VecDeque<_>>()));
    let (tx, mut rx) = mpsc::unbounded_channel();
    let workers = client.policy().max_concurrent_requests.min(unique.len().max(1));
    let mut handles = Vec::with_capacity(workers);
    for _ in 0..workers {
        let (client, queue, tx) = (client.clone(), queue.clone(), tx.clone());
        handles.push(tokio::spawn(async move {
            loop {
                let next = queue.lock().expect("queue lock").pop_front();
                let Some((i, id)) = next else { break };
                let result = fetch_one(&client, &id, post_limit).await;
                if tx.send((i, id, result)).is_err() {
                    break;
                }
            }
        }));
    }
    drop(tx);

    let mut results = Vec::with_capacity(unique.len());
    while let Some(item) = rx.recv().await {
        results.push(item);
    }
    for h in handles {
        if let Err(e) = h.await {
            log::error!("crawl worker panicked: {e}");
        }
    }
    results.sort_by_key(|(i, _, _)| *i);

    let mut channels = Vec::new();
    let mut failures = Vec::new();
    let mut missing_fields = BTreeMap::new();
    for (_, id, result) in results {
        match result {
            Ok((record, missing)) => {
                if !missing.is_empty() {
                    missing_fields.insert(id, missing);
                }
                channels.push(record);
            }
            Err(e) => failures.push(CrawlFailure {
                channel_id: id,
                error: e.to_string(),
            }),
        }
    }
    let corpus = Corpus::new(channels, Vec::new()).expect("ids are unique and there are no videos");
    CrawlReport {
        corpus,
        failures,
        missing_fields,
    }
}
