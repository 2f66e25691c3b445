//! Durable moderator decisions: an append-only JSONL log plus a periodic
//! snapshot. The snapshot records how many log entries it covers, so
//! loading replays only the tail of the log.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use audit_core::corpus::ChannelClass;
use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::ServiceError;

const LOG_FILE: &str = "decisions.log";
const SNAPSHOT_FILE: &str = "decisions.snapshot.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    ConfirmDisturbing,
    ConfirmSuitable,
    NeedsMoreReview,
}

impl Decision {
    pub fn class(self) -> Option<ChannelClass> {
        match self {
            Decision::ConfirmDisturbing => Some(ChannelClass::Disturbing),
            Decision::ConfirmSuitable => Some(ChannelClass::Suitable),
            Decision::NeedsMoreReview => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub channel_id: String,
    pub decision: Decision,
    pub moderator_id: String,
    pub timestamp: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    /// Log entries already folded into `decisions`.
    applied: usize,
    decisions: Vec<ReviewDecision>,
}

/// Whether a write created a decision or replaced the moderator's earlier one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WriteOutcome {
    Created,
    Replaced,
}

#[derive(Debug)]
pub struct DecisionStore {
    dir: PathBuf,
    log: File,
    /// Active decision per (channel, moderator).
    active: BTreeMap<(String, String), ReviewDecision>,
    last_stamp: BTreeMap<String, DateTime<Utc>>,
    logged: usize,
    snapshot_every: usize,
    since_snapshot: usize,
}

fn io(path: &Path, e: std::io::Error) -> ServiceError {
    ServiceError::Store(format!("{}: {e}", path.display()))
}

impl DecisionStore {
    pub fn open(dir: &Path, snapshot_every: usize) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let snap_path = dir.join(SNAPSHOT_FILE);
        let snapshot = if snap_path.exists() {
            let text = std::fs::read_to_string(&snap_path).map_err(|e| io(&snap_path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| ServiceError::Store(format!("{}: {e}", snap_path.display())))?
        } else {
            Snapshot {
                applied: 0,
                decisions: Vec::new(),
            }
        };
        let log_path = dir.join(LOG_FILE);
        let entries = read_log(&log_path)?;
        if entries.len() < snapshot.applied {
            return Err(ServiceError::Store(format!(
                "snapshot covers {} log entries but the log has {}",
                snapshot.applied,
                entries.len()
            )));
        }
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(|e| io(&log_path, e))?;
        let mut store = DecisionStore {
            dir: dir.to_path_buf(),
            log,
            active: BTreeMap::new(),
            last_stamp: BTreeMap::new(),
            logged: entries.len(),
            snapshot_every: snapshot_every.max(1),
            since_snapshot: entries.len() - snapshot.applied,
        };
        for d in snapshot.decisions.into_iter().chain(entries.into_iter().skip(snapshot.applied)) {
            store.apply(d);
        }
        Ok(store)
    }

    fn apply(&mut self, d: ReviewDecision) -> WriteOutcome {
        let stamp = self.last_stamp.entry(d.moderator_id.clone()).or_insert(d.timestamp);
        *stamp = (*stamp).max(d.timestamp);
        match self.active.insert((d.channel_id.clone(), d.moderator_id.clone()), d) {
            Some(_) => WriteOutcome::Replaced,
            None => WriteOutcome::Created,
        }
    }

    /// Persist a decision. The timestamp is assigned here and is strictly
    /// increasing per moderator.
    pub fn record(
        &mut self,
        channel_id: &str,
        moderator_id: &str,
        decision: Decision,
        note: Option<String>,
    ) -> Result<(ReviewDecision, WriteOutcome), ServiceError> {
        let mut timestamp = Utc::now();
        if let Some(&last) = self.last_stamp.get(moderator_id) {
            if timestamp <= last {
                timestamp = last + Duration::microseconds(1);
            }
        }
        let d = ReviewDecision {
            channel_id: channel_id.to_string(),
            decision,
            moderator_id: moderator_id.to_string(),
            timestamp,
            note,
        };
        let line = serde_json::to_string(&d).expect("decision serializes");
        let log_path = self.dir.join(LOG_FILE);
        writeln!(self.log, "{line}").map_err(|e| io(&log_path, e))?;
        self.log.sync_data().map_err(|e| io(&log_path, e))?;
        self.logged += 1;
        self.since_snapshot += 1;
        let outcome = self.apply(d.clone());
        if self.since_snapshot >= self.snapshot_every {
            self.snapshot()?;
        }
        Ok((d, outcome))
    }

    /// Write a snapshot covering the whole log (temp file, then rename).
    pub fn snapshot(&mut self) -> Result<(), ServiceError> {
        let snap = Snapshot {
            applied: self.logged,
            decisions: self.active.values().cloned().collect(),
        };
        let path = self.dir.join(SNAPSHOT_FILE);
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        let text = serde_json::to_string(&snap).expect("snapshot serializes");
        std::fs::write(&tmp, text).map_err(|e| io(&tmp, e))?;
        File::open(&tmp).and_then(|f| f.sync_all()).map_err(|e| io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| io(&path, e))?;
        self.since_snapshot = 0;
        Ok(())
    }

    /// Total decisions ever logged, replacements included.
    pub fn logged(&self) -> usize {
        self.logged
    }

    pub fn active(&self) -> impl Iterator<Item = &ReviewDecision> {
        self.active.values()
    }

    pub fn for_channel(&self, channel_id: &str) -> Vec<ReviewDecision> {
        self.active
            .range((channel_id.to_string(), String::new())..)
            .take_while(|((c, _), _)| c == channel_id)
            .map(|(_, d)| d.clone())
            .collect()
    }

    /// The most recent active decision per channel.
    pub fn latest_by_channel(&self) -> BTreeMap<String, ReviewDecision> {
        let mut out: BTreeMap<String, ReviewDecision> = BTreeMap::new();
        for d in self.active.values() {
            match out.get(&d.channel_id) {
                Some(prev) if prev.timestamp >= d.timestamp => {}
                _ => {
                    out.insert(d.channel_id.clone(), d.clone());
                }
            }
        }
        out
    }

    /// Channel classes implied by confirmations: the most recent confirming
    /// decision per channel wins; "needs more review" is ignored.
    pub fn confirmed_labels(&self) -> BTreeMap<String, ChannelClass> {
        let mut latest: BTreeMap<&str, &ReviewDecision> = BTreeMap::new();
        for d in self.active.values().filter(|d| d.decision.class().is_some()) {
            match latest.get(d.channel_id.as_str()) {
                Some(prev) if prev.timestamp >= d.timestamp => {}
                _ => {
                    latest.insert(&d.channel_id, d);
                }
            }
        }
        latest
            .into_iter()
            .filter_map(|(id, d)| Some((id.to_string(), d.decision.class()?)))
            .collect()
    }
}

/// Read every complete log line. A torn final line (crash mid-append) is
/// skipped; corruption anywhere else is an error.
fn read_log(path: &Path) -> Result<Vec<ReviewDecision>, ServiceError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = File::open(path).map_err(|e| io(path, e))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|e| io(path, e))?;
    let mut out = Vec::with_capacity(lines.len());
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(d) => out.push(d),
            Err(e) if i == last => {
                log::warn!("{}: ignoring torn final entry: {e}", path.display());
            }
            Err(e) => {
                return Err(ServiceError::Store(format!("{} line {}: {e}", path.display(), i + 1)))
            }
        }
    }
    Ok(out)
}
