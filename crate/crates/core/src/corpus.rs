//! Channel, video and post records, their on-disk formats, and the rules
//! that turn per-video annotations into channel labels.
//!
//! The canonical format is JSONL: one channel object per line, with the
//! channel's ground-truth videos embedded under `videos`. Every line carries
//! `schema_version`. A read-only CSV bundle (`channels.csv` + `videos.csv`
//! in one directory) is accepted for interop with flat exports.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

/// Count fields that must be non-negative integers on every channel line.
const COUNT_FIELDS: [&str; 7] = [
    "view_count",
    "video_count",
    "subscriber_count",
    "subscription_count",
    "post_count",
    "links_count",
    "description_char_count",
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid record at line {line} ({id}): {message}")]
    Invalid {
        line: usize,
        id: String,
        message: String,
    },
    #[error("video {video_id} references unknown channel {channel_id}")]
    DanglingChannel {
        video_id: String,
        channel_id: String,
    },
    #[error("duplicate {kind} id {id}")]
    Duplicate { kind: &'static str, id: String },
    #[error("unsupported schema_version {found} (reader supports {expected})")]
    SchemaVersion { found: u64, expected: u32 },
    #[error("no records of class {0} to summarize")]
    EmptyClass(ChannelClass),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// Ground-truth annotation of a single video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VideoLabel {
    Suitable,
    Disturbing,
    Restricted,
    Irrelevant,
}

impl VideoLabel {
    /// The channel class this video counts toward, if any.
    pub fn class(self) -> Option<ChannelClass> {
        match self {
            VideoLabel::Suitable => Some(ChannelClass::Suitable),
            VideoLabel::Disturbing => Some(ChannelClass::Disturbing),
            VideoLabel::Restricted | VideoLabel::Irrelevant => None,
        }
    }
}

impl FromStr for VideoLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "suitable" => Ok(VideoLabel::Suitable),
            "disturbing" => Ok(VideoLabel::Disturbing),
            "restricted" => Ok(VideoLabel::Restricted),
            "irrelevant" => Ok(VideoLabel::Irrelevant),
            other => Err(format!("unknown video label {other:?}")),
        }
    }
}

/// Binary channel class. The numeric encoding is fixed: 0 = suitable,
/// 1 = disturbing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelClass {
    Suitable,
    Disturbing,
}

impl ChannelClass {
    pub const ALL: [ChannelClass; 2] = [ChannelClass::Suitable, ChannelClass::Disturbing];

    pub fn index(self) -> usize {
        match self {
            ChannelClass::Suitable => 0,
            ChannelClass::Disturbing => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(ChannelClass::Suitable),
            1 => Some(ChannelClass::Disturbing),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelClass::Suitable => "suitable",
            ChannelClass::Disturbing => "disturbing",
        }
    }
}

impl fmt::Display for ChannelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "suitable" | "0" => Ok(ChannelClass::Suitable),
            "disturbing" | "1" => Ok(ChannelClass::Disturbing),
            other => Err(format!("unknown channel class {other:?}")),
        }
    }
}

/// Why a channel or video is (un)reachable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalReason {
    Available,
    Private,
    AccountTerminated,
    TermsOfService,
    Copyright,
    SpamDeceptive,
    ChannelAbsent,
    OtherUnavailable,
}

impl RemovalReason {
    pub const ALL: [RemovalReason; 8] = [
        RemovalReason::Available,
        RemovalReason::Private,
        RemovalReason::AccountTerminated,
        RemovalReason::TermsOfService,
        RemovalReason::Copyright,
        RemovalReason::SpamDeceptive,
        RemovalReason::ChannelAbsent,
        RemovalReason::OtherUnavailable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RemovalReason::Available => "available",
            RemovalReason::Private => "private",
            RemovalReason::AccountTerminated => "account_terminated",
            RemovalReason::TermsOfService => "terms_of_service",
            RemovalReason::Copyright => "copyright",
            RemovalReason::SpamDeceptive => "spam_deceptive",
            RemovalReason::ChannelAbsent => "channel_absent",
            RemovalReason::OtherUnavailable => "other_unavailable",
        }
    }
}

impl FromStr for RemovalReason {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        RemovalReason::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown removal reason {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusReport {
    pub available: bool,
    pub reason: RemovalReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_message: Option<String>,
}

impl StatusReport {
    pub fn available() -> Self {
        StatusReport {
            available: true,
            reason: RemovalReason::Available,
            raw_message: None,
        }
    }

    pub fn removed(reason: RemovalReason, raw_message: Option<String>) -> Self {
        StatusReport {
            available: reason == RemovalReason::Available,
            reason,
            raw_message,
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.available != (self.reason == RemovalReason::Available) {
            return Err(format!(
                "status available={} disagrees with reason {}",
                self.available,
                self.reason.as_str()
            ));
        }
        Ok(())
    }
}

impl Default for StatusReport {
    fn default() -> Self {
        StatusReport::available()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub channel_id: String,
    pub label: VideoLabel,
    #[serde(default)]
    pub made_for_kids: Option<bool>,
    #[serde(default)]
    pub status: StatusReport,
    /// Score from an external per-video content classifier, when one was run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkedPlatform {
    pub platform: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostRecord {
    pub date_published: NaiveDate,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub hashtags: Vec<String>,
    #[serde(default)]
    pub external_links: Vec<String>,
    #[serde(default)]
    pub youtube_links: Vec<String>,
    #[serde(default)]
    pub channel_links: Vec<String>,
    #[serde(default)]
    pub like_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thumbnail_video: Option<String>,
}

impl PostRecord {
    fn check(&self) -> std::result::Result<(), String> {
        for link in self
            .external_links
            .iter()
            .chain(&self.youtube_links)
            .chain(&self.channel_links)
        {
            url::Url::parse(link).map_err(|e| format!("post link {link:?}: {e}"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub channel_id: String,
    pub published_at: NaiveDate,
    #[serde(default)]
    pub country: Option<String>,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub topic_categories: Vec<String>,
    #[serde(default)]
    pub made_for_kids: Option<bool>,
    pub view_count: u64,
    pub video_count: u64,
    /// Absent when the owner hides it.
    #[serde(default)]
    pub subscriber_count: Option<u64>,
    pub subscription_count: u64,
    pub post_count: u64,
    pub links_count: u64,
    pub description_char_count: u64,
    #[serde(default)]
    pub hidden_subscribers: bool,
    #[serde(default)]
    pub linked_platforms: Vec<LinkedPlatform>,
    #[serde(default)]
    pub email_present: bool,
    #[serde(default)]
    pub posts: Vec<PostRecord>,
    #[serde(default)]
    pub status: StatusReport,
}

/// Characters in `text` excluding whitespace.
pub fn char_count_no_spaces(text: &str) -> u64 {
    text.chars().filter(|c| !c.is_whitespace()).count() as u64
}

impl ChannelRecord {
    /// A bare available channel with zeroed counts, for builders and tests.
    pub fn skeleton(channel_id: impl Into<String>, published_at: NaiveDate) -> Self {
        ChannelRecord {
            channel_id: channel_id.into(),
            published_at,
            country: None,
            description: String::new(),
            keywords: Vec::new(),
            topic_categories: Vec::new(),
            made_for_kids: None,
            view_count: 0,
            video_count: 0,
            subscriber_count: Some(0),
            subscription_count: 0,
            post_count: 0,
            links_count: 0,
            description_char_count: 0,
            hidden_subscribers: false,
            linked_platforms: Vec::new(),
            email_present: false,
            posts: Vec::new(),
            status: StatusReport::available(),
        }
    }

    /// Replace the description and keep `description_char_count` in sync.
    pub fn set_description(&mut self, text: impl Into<String>) {
        self.description = text.into();
        self.description_char_count = char_count_no_spaces(&self.description);
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        let expected = char_count_no_spaces(&self.description);
        if self.description_char_count != expected {
            return Err(format!(
                "description_char_count is {} but description has {expected} non-space characters",
                self.description_char_count
            ));
        }
        if self.hidden_subscribers && self.subscriber_count.is_some_and(|n| n != 0) {
            return Err("subscriber_count must be absent when hidden_subscribers is set".into());
        }
        self.status.check()?;
        for link in &self.linked_platforms {
            url::Url::parse(&link.url).map_err(|e| format!("linked {}: {e}", link.platform))?;
        }
        self.posts.iter().try_for_each(PostRecord::check)
    }
}

/// Immutable set of channels and their ground-truth videos.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    channels: Vec<ChannelRecord>,
    videos: Vec<VideoRecord>,
    channel_index: HashMap<String, usize>,
    videos_by_channel: HashMap<String, Vec<usize>>,
}

impl Corpus {
    /// Build a corpus, checking id uniqueness and referential integrity.
    pub fn new(channels: Vec<ChannelRecord>, videos: Vec<VideoRecord>) -> Result<Self> {
        let mut channel_index = HashMap::with_capacity(channels.len());
        for (i, c) in channels.iter().enumerate() {
            if channel_index.insert(c.channel_id.clone(), i).is_some() {
                return Err(CorpusError::Duplicate {
                    kind: "channel",
                    id: c.channel_id.clone(),
                });
            }
        }
        let mut seen = HashSet::with_capacity(videos.len());
        let mut videos_by_channel: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, v) in videos.iter().enumerate() {
            if !seen.insert(v.video_id.as_str()) {
                return Err(CorpusError::Duplicate {
                    kind: "video",
                    id: v.video_id.clone(),
                });
            }
            if !channel_index.contains_key(&v.channel_id) {
                return Err(CorpusError::DanglingChannel {
                    video_id: v.video_id.clone(),
                    channel_id: v.channel_id.clone(),
                });
            }
            videos_by_channel
                .entry(v.channel_id.clone())
                .or_default()
                .push(i);
        }
        Ok(Corpus {
            channels,
            videos,
            channel_index,
            videos_by_channel,
        })
    }

    pub fn channels(&self) -> &[ChannelRecord] {
        &self.channels
    }

    pub fn videos(&self) -> &[VideoRecord] {
        &self.videos
    }

    pub fn channel(&self, id: &str) -> Option<&ChannelRecord> {
        self.channel_index.get(id).map(|&i| &self.channels[i])
    }

    pub fn videos_of<'a>(&'a self, channel_id: &str) -> impl Iterator<Item = &'a VideoRecord> + 'a {
        self.videos_by_channel
            .get(channel_id)
            .into_iter()
            .flatten()
            .map(move |&i| &self.videos[i])
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn into_parts(self) -> (Vec<ChannelRecord>, Vec<VideoRecord>) {
        (self.channels, self.videos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    CsvBundle,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "csv" | "csv-bundle" => Ok(Format::CsvBundle),
            other => Err(format!("unknown corpus format {other:?}")),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ChannelLine {
    schema_version: u32,
    #[serde(flatten)]
    channel: ChannelRecord,
    #[serde(default)]
    videos: Vec<VideoRecord>,
}

pub fn load_corpus(path: &Path, format: Format) -> Result<Corpus> {
    match format {
        Format::Jsonl => {
            let file = File::open(path).map_err(|source| CorpusError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            read_jsonl(BufReader::new(file))
        }
        Format::CsvBundle => read_csv_bundle(path),
    }
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut channels = Vec::new();
    let mut videos = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        let id = value
            .get("channel_id")
            .and_then(|v| v.as_str())
            .unwrap_or("?")
            .to_string();
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(found) => {
                return Err(CorpusError::SchemaVersion {
                    found,
                    expected: SCHEMA_VERSION,
                })
            }
            None => {
                return Err(CorpusError::Parse {
                    line: line_no,
                    message: "missing schema_version".into(),
                })
            }
        }
        for field in COUNT_FIELDS {
            if let Some(n) = value.get(field).and_then(|v| v.as_i64()) {
                if n < 0 {
                    return Err(CorpusError::Invalid {
                        line: line_no,
                        id,
                        message: format!("{field} must be non-negative, got {n}"),
                    });
                }
            }
        }
        let parsed: ChannelLine =
            serde_json::from_value(value).map_err(|e| CorpusError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        parsed.channel.check().map_err(|message| CorpusError::Invalid {
            line: line_no,
            id: id.clone(),
            message,
        })?;
        for v in &parsed.videos {
            if v.channel_id != parsed.channel.channel_id {
                return Err(CorpusError::DanglingChannel {
                    video_id: v.video_id.clone(),
                    channel_id: v.channel_id.clone(),
                });
            }
            v.status.check().map_err(|message| CorpusError::Invalid {
                line: line_no,
                id: v.video_id.clone(),
                message,
            })?;
        }
        videos.extend(parsed.videos);
        channels.push(parsed.channel);
    }
    Corpus::new(channels, videos)
}

pub fn write_jsonl<W: Write>(corpus: &Corpus, mut writer: W) -> std::io::Result<()> {
    for channel in corpus.channels() {
        let line = ChannelLine {
            schema_version: SCHEMA_VERSION,
            channel: channel.clone(),
            videos: corpus.videos_of(&channel.channel_id).cloned().collect(),
        };
        serde_json::to_writer(&mut writer, &line)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_jsonl(corpus, BufWriter::new(file)).map_err(io_err)
}

#[derive(Deserialize)]
struct CsvChannelRow {
    channel_id: String,
    published_at: NaiveDate,
    #[serde(default)]
    country: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    keywords: String,
    #[serde(default)]
    topic_categories: String,
    #[serde(default)]
    made_for_kids: String,
    view_count: i64,
    video_count: i64,
    #[serde(default)]
    subscriber_count: String,
    subscription_count: i64,
    post_count: i64,
    links_count: i64,
    #[serde(default)]
    hidden_subscribers: String,
    #[serde(default)]
    linked_platforms: String,
    #[serde(default)]
    email_present: String,
    #[serde(default)]
    reason: String,
    #[serde(default)]
    raw_message: String,
}

#[derive(Deserialize)]
struct CsvVideoRow {
    video_id: String,
    channel_id: String,
    label: String,
    #[serde(default)]
    made_for_kids: String,
    #[serde(default)]
    reason: String,
    #[serde(default)]
    raw_message: String,
}

fn split_list(s: &str) -> Vec<String> {
    s.split('|')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

fn parse_flag(s: &str) -> std::result::Result<Option<bool>, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "" => Ok(None),
        "true" | "1" | "yes" => Ok(Some(true)),
        "false" | "0" | "no" => Ok(Some(false)),
        other => Err(format!("bad boolean {other:?}")),
    }
}

fn parse_status(reason: &str, raw: &str) -> std::result::Result<StatusReport, String> {
    let reason = if reason.trim().is_empty() {
        RemovalReason::Available
    } else {
        reason.parse()?
    };
    let raw = (!raw.trim().is_empty()).then(|| raw.to_string());
    Ok(StatusReport::removed(reason, raw))
}

fn non_negative(field: &str, n: i64) -> std::result::Result<u64, String> {
    u64::try_from(n).map_err(|_| format!("{field} must be non-negative, got {n}"))
}

/// Read `channels.csv` and `videos.csv` from `dir`.
///
/// List-valued columns (`keywords`, `topic_categories`) are `|`-separated;
/// `linked_platforms` entries are `platform=url`. Posts are not part of the
/// bundle. Line numbers in errors count the header as line 1.
pub fn read_csv_bundle(dir: &Path) -> Result<Corpus> {
    let open = |name: &str| {
        let p = dir.join(name);
        csv::Reader::from_path(&p).map_err(|e| CorpusError::Io {
            path: p,
            source: std::io::Error::other(e),
        })
    };
    let mut channels = Vec::new();
    for (i, row) in open("channels.csv")?.deserialize::<CsvChannelRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| CorpusError::Parse {
            line,
            message: e.to_string(),
        })?;
        let invalid = |message: String| CorpusError::Invalid {
            line,
            id: row.channel_id.clone(),
            message,
        };
        let hidden = parse_flag(&row.hidden_subscribers)
            .map_err(invalid)?
            .unwrap_or(false);
        let subscriber_count = match row.subscriber_count.trim() {
            "" => None,
            s => Some(
                s.parse::<i64>()
                    .map_err(|e| invalid(format!("subscriber_count: {e}")))
                    .and_then(|n| non_negative("subscriber_count", n).map_err(invalid))?,
            ),
        };
        let linked_platforms = split_list(&row.linked_platforms)
            .into_iter()
            .map(|entry| match entry.split_once('=') {
                Some((p, u)) => Ok(LinkedPlatform {
                    platform: p.trim().to_string(),
                    url: u.trim().to_string(),
                }),
                None => Err(invalid(format!("linked platform {entry:?} is not platform=url"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut channel = ChannelRecord {
            channel_id: row.channel_id.clone(),
            published_at: row.published_at,
            country: (!row.country.trim().is_empty()).then(|| row.country.trim().to_string()),
            description: String::new(),
            keywords: split_list(&row.keywords),
            topic_categories: split_list(&row.topic_categories),
            made_for_kids: parse_flag(&row.made_for_kids).map_err(invalid)?,
            view_count: non_negative("view_count", row.view_count).map_err(invalid)?,
            video_count: non_negative("video_count", row.video_count).map_err(invalid)?,
            subscriber_count: if hidden { None } else { subscriber_count },
            subscription_count: non_negative("subscription_count", row.subscription_count)
                .map_err(invalid)?,
            post_count: non_negative("post_count", row.post_count).map_err(invalid)?,
            links_count: non_negative("links_count", row.links_count).map_err(invalid)?,
            description_char_count: 0,
            hidden_subscribers: hidden,
            linked_platforms,
            email_present: parse_flag(&row.email_present)
                .map_err(invalid)?
                .unwrap_or(false),
            posts: Vec::new(),
            status: parse_status(&row.reason, &row.raw_message).map_err(invalid)?,
        };
        channel.set_description(row.description.clone());
        channel.check().map_err(invalid)?;
        channels.push(channel);
    }
    let mut videos = Vec::new();
    for (i, row) in open("videos.csv")?.deserialize::<CsvVideoRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| CorpusError::Parse {
            line,
            message: e.to_string(),
        })?;
        let invalid = |message: String| CorpusError::Invalid {
            line,
            id: row.video_id.clone(),
            message,
        };
        videos.push(VideoRecord {
            video_id: row.video_id.clone(),
            channel_id: row.channel_id.clone(),
            label: row.label.parse().map_err(invalid)?,
            made_for_kids: parse_flag(&row.made_for_kids).map_err(invalid)?,
            status: parse_status(&row.reason, &row.raw_message).map_err(invalid)?,
            content_score: None,
        });
    }
    Corpus::new(channels, videos)
}

/// Class assigned to a channel from its ground-truth videos.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelLabel {
    pub value: ChannelClass,
    pub disturbing_ratio: f64,
    pub suitable_videos: u32,
    pub disturbing_videos: u32,
}

impl ChannelLabel {
    pub fn from_counts(suitable: u32, disturbing: u32) -> Option<Self> {
        let total = suitable + disturbing;
        if total == 0 {
            return None;
        }
        Some(ChannelLabel {
            value: if disturbing > 0 {
                ChannelClass::Disturbing
            } else {
                ChannelClass::Suitable
            },
            disturbing_ratio: disturbing as f64 / total as f64,
            suitable_videos: suitable,
            disturbing_videos: disturbing,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelSet {
    pub labels: BTreeMap<String, ChannelLabel>,
    /// Channels with no suitable or disturbing video.
    pub excluded: Vec<String>,
}

impl LabelSet {
    pub fn get(&self, channel_id: &str) -> Option<&ChannelLabel> {
        self.labels.get(channel_id)
    }

    pub fn count(&self, class: ChannelClass) -> usize {
        self.labels.values().filter(|l| l.value == class).count()
    }

    /// Replace the class of the given channels, e.g. with moderator decisions.
    ///
    /// Overridden channels keep their video counts; the ratio is set to the
    /// class extreme when the counts disagree with the new class.
    pub fn with_overrides(&self, overrides: &BTreeMap<String, ChannelClass>) -> LabelSet {
        let mut out = self.clone();
        for (id, &class) in overrides {
            let entry = out.labels.entry(id.clone()).or_insert(ChannelLabel {
                value: class,
                disturbing_ratio: 0.0,
                suitable_videos: 0,
                disturbing_videos: 0,
            });
            entry.value = class;
            let consistent = (entry.disturbing_ratio > 0.0) == (class == ChannelClass::Disturbing);
            if !consistent {
                entry.disturbing_ratio = match class {
                    ChannelClass::Suitable => 0.0,
                    ChannelClass::Disturbing => 1.0,
                };
            }
            out.excluded.retain(|e| e != id);
        }
        out
    }
}

/// Derive channel labels: disturbing iff at least one ground-truth video is
/// disturbing. Restricted and irrelevant videos are ignored; channels left
/// with no labeled video are excluded with a warning.
pub fn propagate_labels(corpus: &Corpus) -> LabelSet {
    let mut out = LabelSet::default();
    for channel in corpus.channels() {
        let (mut suitable, mut disturbing) = (0u32, 0u32);
        for v in corpus.videos_of(&channel.channel_id) {
            match v.label.class() {
                Some(ChannelClass::Suitable) => suitable += 1,
                Some(ChannelClass::Disturbing) => disturbing += 1,
                None => {}
            }
        }
        match ChannelLabel::from_counts(suitable, disturbing) {
            Some(label) => {
                out.labels.insert(channel.channel_id.clone(), label);
            }
            None => {
                log::warn!(
                    "channel {} has no suitable/disturbing video; excluded",
                    channel.channel_id
                );
                out.excluded.push(channel.channel_id.clone());
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BreakdownScope {
    Videos,
    Channels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusBreakdown {
    pub class: ChannelClass,
    pub total: usize,
    pub counts: BTreeMap<RemovalReason, usize>,
}

impl StatusBreakdown {
    pub fn percent(&self, reason: RemovalReason) -> f64 {
        100.0 * self.counts.get(&reason).copied().unwrap_or(0) as f64 / self.total as f64
    }

    pub fn removed_percent(&self) -> f64 {
        100.0 - self.percent(RemovalReason::Available)
    }

    /// `(reason, percent)` for every reason that occurs.
    pub fn percentages(&self) -> Vec<(RemovalReason, f64)> {
        self.counts
            .keys()
            .map(|&r| (r, self.percent(r)))
            .collect()
    }
}

/// Frequency of status reasons over the videos (or channels) of one class.
pub fn status_breakdown(
    corpus: &Corpus,
    class: ChannelClass,
    scope: BreakdownScope,
) -> Result<StatusBreakdown> {
    let mut counts: BTreeMap<RemovalReason, usize> = BTreeMap::new();
    match scope {
        BreakdownScope::Videos => {
            for v in corpus.videos().iter().filter(|v| v.label.class() == Some(class)) {
                *counts.entry(v.status.reason).or_default() += 1;
            }
        }
        BreakdownScope::Channels => {
            let labels = propagate_labels(corpus);
            for c in corpus.channels() {
                if labels.get(&c.channel_id).map(|l| l.value) == Some(class) {
                    *counts.entry(c.status.reason).or_default() += 1;
                }
            }
        }
    }
    let total = counts.values().sum();
    if total == 0 {
        return Err(CorpusError::EmptyClass(class));
    }
    Ok(StatusBreakdown {
        class,
        total,
        counts,
    })
}

/// Write a `channel_id,label` CSV.
pub fn write_label_file<W: Write>(
    labels: &BTreeMap<String, ChannelClass>,
    writer: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["channel_id", "label"])?;
    for (id, class) in labels {
        w.write_record([id.as_str(), class.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_label_file<R: std::io::Read>(reader: R) -> Result<BTreeMap<String, ChannelClass>> {
    let mut out = BTreeMap::new();
    for (i, rec) in csv::Reader::from_reader(reader).records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CorpusError::Parse {
            line,
            message: e.to_string(),
        })?;
        let (Some(id), Some(label)) = (rec.get(0), rec.get(1)) else {
            return Err(CorpusError::Parse {
                line,
                message: "expected channel_id,label".into(),
            });
        };
        let class = label.parse().map_err(|message| CorpusError::Invalid {
            line,
            id: id.to_string(),
            message,
        })?;
        out.insert(id.to_string(), class);
    }
    Ok(out)
}

/// Read `channel_id,count` rows of known disturbing-video counts. A header
/// row is allowed.
pub fn read_count_file<R: std::io::Read>(reader: R) -> Result<BTreeMap<String, u32>> {
    let mut out = BTreeMap::new();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| CorpusError::Parse {
            line,
            message: e.to_string(),
        })?;
        let (Some(id), Some(count)) = (rec.get(0), rec.get(1)) else {
            return Err(CorpusError::Parse {
                line,
                message: "expected channel_id,count".into(),
            });
        };
        match count.parse::<u32>() {
            Ok(c) => {
                out.insert(id.to_string(), c);
            }
            Err(_) if i == 0 => {}
            Err(e) => {
                return Err(CorpusError::Invalid {
                    line,
                    id: id.to_string(),
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

/// Annotated disturbing-video counts of channels that have any.
pub fn disturbing_counts(labels: &LabelSet) -> BTreeMap<String, u32> {
    labels
        .labels
        .iter()
        .filter(|(_, l)| l.disturbing_videos > 0)
        .map(|(id, l)| (id.clone(), l.disturbing_videos))
        .collect()
}
