use std::path::Path;
use std::sync::OnceLock;

use audit_core::corpus::{RemovalReason, StatusReport};
use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::CollectorError;

const BUNDLED_RULES: &str = include_str!("../data/status_rules.toml");

/// A fetched HTML page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPage {
    pub url: String,
    pub body: String,
    pub fetched_at: DateTime<Utc>,
}

impl RawPage {
    pub fn new(url: impl Into<String>, body: impl Into<String>) -> Self {
        RawPage {
            url: url.into(),
            body: body.into(),
            fetched_at: Utc::now(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct RulesFile {
    alert_pattern: String,
    #[serde(default)]
    rule: Vec<RuleSpec>,
}

#[derive(Debug, Deserialize)]
struct RuleSpec {
    reason: RemovalReason,
    pattern: String,
}

/// Ordered message patterns mapping page banners to removal reasons.
#[derive(Debug, Clone)]
pub struct StatusRules {
    alert: Regex,
    rules: Vec<(Regex, RemovalReason)>,
}

impl StatusRules {
    pub fn bundled() -> &'static StatusRules {
        static RULES: OnceLock<StatusRules> = OnceLock::new();
        RULES.get_or_init(|| StatusRules::from_toml(BUNDLED_RULES).expect("bundled status rules"))
    }

    pub fn from_toml(text: &str) -> Result<Self, CollectorError> {
        let file: RulesFile =
            toml::from_str(text).map_err(|e| CollectorError::Rules(e.to_string()))?;
        Self::compile(file)
    }

    pub fn from_json(text: &str) -> Result<Self, CollectorError> {
        let file: RulesFile =
            serde_json::from_str(text).map_err(|e| CollectorError::Rules(e.to_string()))?;
        Self::compile(file)
    }

    /// TOML unless the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self, CollectorError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CollectorError::Rules(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    fn compile(file: RulesFile) -> Result<Self, CollectorError> {
        let re = |p: &str| Regex::new(p).map_err(|e| CollectorError::Rules(e.to_string()));
        let alert = re(&file.alert_pattern)?;
        if alert.captures_len() < 2 {
            return Err(CollectorError::Rules(
                "alert_pattern needs a capture group for the message".into(),
            ));
        }
        let rules = file
            .rule
            .into_iter()
            .map(|r| {
                if r.reason == RemovalReason::Available {
                    return Err(CollectorError::Rules(
                        "a rule cannot map to `available`".into(),
                    ));
                }
                Ok((re(&r.pattern)?, r.reason))
            })
            .collect::<Result<_, _>>()?;
        Ok(StatusRules { alert, rules })
    }

    fn classify(&self, message: &str) -> Option<RemovalReason> {
        self.rules
            .iter()
            .find(|(re, _)| re.is_match(message))
            .map(|&(_, reason)| reason)
    }

    /// Status shown by a page. Never fails: a banner with an unrecognized
    /// message is `other_unavailable`, a page without one is available.
    pub fn parse(&self, page: &RawPage) -> StatusReport {
        if let Some(caps) = self.alert.captures(&page.body) {
            let message = visible_text(caps.get(1).map_or("", |m| m.as_str()));
            if !message.is_empty() {
                let reason = self.classify(&message).unwrap_or(RemovalReason::OtherUnavailable);
                return StatusReport::removed(reason, Some(message));
            }
        }
        // Some pages carry the notice outside a recognizable banner.
        let text = visible_text(&page.body);
        for sentence in text.split_inclusive(['.', '!', '\n']) {
            if let Some(reason) = self.classify(sentence) {
                return StatusReport::removed(reason, Some(sentence.trim().to_string()));
            }
        }
        StatusReport::available()
    }
}

/// Parse a page with the bundled rules.
pub fn parse_status(page: &RawPage) -> StatusReport {
    StatusRules::bundled().parse(page)
}

/// Tag-stripped, entity-decoded, whitespace-collapsed text.
fn visible_text(html: &str) -> String {
    static HIDDEN: OnceLock<Regex> = OnceLock::new();
    static TAG: OnceLock<Regex> = OnceLock::new();
    let hidden = HIDDEN.get_or_init(|| {
        Regex::new(r"(?is)<script\b.*?</script>|<style\b.*?</style>|<!--.*?-->").unwrap()
    });
    let tag = TAG.get_or_init(|| Regex::new(r"(?s)<[^>]*>").unwrap());
    let text = hidden.replace_all(html, " ");
    let text = tag.replace_all(&text, " ");
    let text = text
        .replace("&nbsp;", " ")
        .replace("&#39;", "'")
        .replace("&#x27;", "'")
        .replace("&apos;", "'")
        .replace("&quot;", "\"")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&amp;", "&");
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
