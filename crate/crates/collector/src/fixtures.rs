use std::collections::BTreeMap;
use std::path::Path;

use audit_core::corpus::{ChannelRecord, Corpus, PostRecord, RemovalReason};
use serde::{Deserialize, Serialize};

use crate::api::ApiChannel;
use crate::CollectorError;

/// Canned responses for one channel id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    /// Body of `/api/channels/{id}`; absent means 404.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ApiChannel>,
    /// HTML of `/channel/{id}`; a plain page is generated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page: Option<String>,
    /// Community-tab posts in any order; absent means no community tab.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posts: Option<Vec<PostRecord>>,
    /// Answer every request for this id with HTTP 500.
    #[serde(default)]
    pub fail: bool,
}

impl Fixture {
    pub fn html(&self, id: &str) -> String {
        self.page.clone().unwrap_or_else(|| {
            format!(
                "<html><head><title>{id}</title></head><body><h1>{id}</h1>\
                 <div id=\"channel-header\">Channel home</div></body></html>"
            )
        })
    }
}

/// Page text the platform shows for each removal reason.
pub fn removal_message(reason: RemovalReason) -> &'static str {
    match reason {
        RemovalReason::Available => "",
        RemovalReason::Private => "This channel is private.",
        RemovalReason::AccountTerminated => {
            "This video is no longer available because the YouTube account associated with this video has been terminated."
        }
        RemovalReason::TermsOfService => {
            "This account has been terminated for violating YouTube's Terms of Service."
        }
        RemovalReason::Copyright => {
            "This account has been terminated because we received multiple third-party notifications of copyright infringement."
        }
        RemovalReason::SpamDeceptive => {
            "This account has been terminated due to multiple or severe violations of YouTube's policy against spam, deceptive practices, and misleading content."
        }
        RemovalReason::ChannelAbsent => "This channel does not exist.",
        RemovalReason::OtherUnavailable => "This channel is unavailable right now.",
    }
}

pub fn removal_page(message: &str) -> String {
    format!(
        "<html><body><div class=\"yt-alert-message\">{}</div></body></html>",
        message.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
    )
}

/// Fixtures keyed by channel id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixtureStore {
    fixtures: BTreeMap<String, Fixture>,
}

impl FixtureStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// One `<channel_id>.json` file per fixture.
    pub fn load_dir(dir: &Path) -> Result<Self, CollectorError> {
        let io = |e: std::io::Error| CollectorError::Fixture(format!("{}: {e}", dir.display()));
        let mut store = FixtureStore::new();
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .collect::<Result<Vec<_>, _>>()
            .map_err(io)?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| CollectorError::Fixture(format!("bad file name {}", path.display())))?
                .to_string();
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CollectorError::Fixture(format!("{}: {e}", path.display())))?;
            let fixture: Fixture = serde_json::from_str(&text)
                .map_err(|e| CollectorError::Fixture(format!("{}: {e}", path.display())))?;
            store.insert(id, fixture);
        }
        Ok(store)
    }

    pub fn save_dir(&self, dir: &Path) -> Result<(), CollectorError> {
        let io = |e: std::io::Error| CollectorError::Fixture(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        for (id, f) in &self.fixtures {
            let text = serde_json::to_string_pretty(f).expect("fixture serializes");
            std::fs::write(dir.join(format!("{id}.json")), text).map_err(io)?;
        }
        Ok(())
    }

    /// Fixtures that reproduce a corpus: available channels answer the API,
    /// removed ones return 404 and a page carrying their removal message.
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut store = FixtureStore::new();
        for c in corpus.channels() {
            store.insert(c.channel_id.clone(), Self::fixture_for(c));
        }
        store
    }

    fn fixture_for(c: &ChannelRecord) -> Fixture {
        if c.status.available {
            Fixture {
                channel: Some(ApiChannel::from_record(c)),
                page: None,
                posts: (c.made_for_kids != Some(true)).then(|| c.posts.clone()),
                fail: false,
            }
        } else {
            let msg = c
                .status
                .raw_message
                .clone()
                .unwrap_or_else(|| removal_message(c.status.reason).to_string());
            Fixture {
                page: Some(removal_page(&msg)),
                ..Default::default()
            }
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, fixture: Fixture) {
        self.fixtures.insert(id.into(), fixture);
    }

    pub fn get(&self, id: &str) -> Option<&Fixture> {
        self.fixtures.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.fixtures.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }
}

/// At most `limit` posts, newest first.
pub fn newest_posts(posts: &[PostRecord], limit: usize) -> Vec<PostRecord> {
    let mut out = posts.to_vec();
    out.sort_by_key(|p| std::cmp::Reverse(p.date_published));
    out.truncate(limit);
    out
}
