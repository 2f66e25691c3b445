use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_segmentation::UnicodeSegmentation;

use crate::corpus::ChannelRecord;

const BUNDLED_RANKING: &str = include_str!("../../data/emoji_sentiment_ranking_v1.csv");

/// Extended_Pictographic ranges (Unicode emoji-data), inclusive.
const PICTOGRAPHIC: &[(u32, u32)] = &[
    (0x00A9, 0x00A9),
    (0x00AE, 0x00AE),
    (0x203C, 0x203C),
    (0x2049, 0x2049),
    (0x2122, 0x2122),
    (0x2139, 0x2139),
    (0x2194, 0x2199),
    (0x21A9, 0x21AA),
    (0x231A, 0x231B),
    (0x2328, 0x2328),
    (0x2388, 0x2388),
    (0x23CF, 0x23CF),
    (0x23E9, 0x23F3),
    (0x23F8, 0x23FA),
    (0x24C2, 0x24C2),
    (0x25AA, 0x25AB),
    (0x25B6, 0x25B6),
    (0x25C0, 0x25C0),
    (0x25FB, 0x25FE),
    (0x2600, 0x2605),
    (0x2607, 0x2612),
    (0x2614, 0x2685),
    (0x2690, 0x2705),
    (0x2708, 0x2712),
    (0x2714, 0x2714),
    (0x2716, 0x2716),
    (0x271D, 0x271D),
    (0x2721, 0x2721),
    (0x2728, 0x2728),
    (0x2733, 0x2734),
    (0x2744, 0x2744),
    (0x2747, 0x2747),
    (0x274C, 0x274C),
    (0x274E, 0x274E),
    (0x2753, 0x2755),
    (0x2757, 0x2757),
    (0x2763, 0x2767),
    (0x2795, 0x2797),
    (0x27A1, 0x27A1),
    (0x27B0, 0x27B0),
    (0x27BF, 0x27BF),
    (0x2934, 0x2935),
    (0x2B05, 0x2B07),
    (0x2B1B, 0x2B1C),
    (0x2B50, 0x2B50),
    (0x2B55, 0x2B55),
    (0x3030, 0x3030),
    (0x303D, 0x303D),
    (0x3297, 0x3297),
    (0x3299, 0x3299),
    (0x1F000, 0x1F0FF),
    (0x1F10D, 0x1F10F),
    (0x1F12F, 0x1F12F),
    (0x1F16C, 0x1F171),
    (0x1F17E, 0x1F17F),
    (0x1F18E, 0x1F18E),
    (0x1F191, 0x1F19A),
    (0x1F1AD, 0x1F1E5),
    (0x1F201, 0x1F20F),
    (0x1F21A, 0x1F21A),
    (0x1F22F, 0x1F22F),
    (0x1F232, 0x1F23A),
    (0x1F23C, 0x1F23F),
    (0x1F249, 0x1F3FA),
    (0x1F400, 0x1F53D),
    (0x1F546, 0x1F64F),
    (0x1F680, 0x1F6FF),
    (0x1F774, 0x1F77F),
    (0x1F7D5, 0x1F7FF),
    (0x1F80C, 0x1F80F),
    (0x1F848, 0x1F84F),
    (0x1F85A, 0x1F85F),
    (0x1F888, 0x1F88F),
    (0x1F8AE, 0x1F8FF),
    (0x1F90C, 0x1F93A),
    (0x1F93C, 0x1F945),
    (0x1F947, 0x1FAFF),
    (0x1FC00, 0x1FFFD),
];

const REGIONAL_INDICATORS: (u32, u32) = (0x1F1E6, 0x1F1FF);
const KEYCAP: char = '\u{20E3}';

fn is_pictographic(c: char) -> bool {
    let cp = c as u32;
    PICTOGRAPHIC
        .binary_search_by(|&(lo, hi)| {
            if hi < cp {
                std::cmp::Ordering::Less
            } else if lo > cp {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        })
        .is_ok()
}

/// Whether a grapheme cluster is an emoji (pictograph, flag, or keycap).
pub fn is_emoji(grapheme: &str) -> bool {
    grapheme.chars().any(|c| {
        is_pictographic(c)
            || (REGIONAL_INDICATORS.0..=REGIONAL_INDICATORS.1).contains(&(c as u32))
            || c == KEYCAP
    })
}

/// Drop presentation selectors so "❤\u{FE0F}" and "❤" count as one emoji.
fn normalize(grapheme: &str) -> String {
    grapheme
        .chars()
        .filter(|&c| c != '\u{FE0F}' && c != '\u{FE0E}')
        .collect()
}

/// Every emoji occurrence in `text`, in order, normalized.
pub fn extract_emojis(text: &str) -> Vec<String> {
    text.graphemes(true)
        .filter(|g| is_emoji(g))
        .map(normalize)
        .collect()
}

#[derive(Debug, Error)]
pub enum RankingError {
    #[error("ranking csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("ranking csv has neither an `Emoji` nor a `codepoints` column")]
    MissingKey,
    #[error("ranking csv lacks the {0:?} column")]
    MissingColumn(&'static str),
    #[error("ranking line {line}: {message}")]
    Entry { line: usize, message: String },
}

/// Which published column is used as the emoji's score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreColumn {
    /// The v1.0 `Position` column, the score reported in published emoji tables.
    #[default]
    Position,
    /// `(positive - negative) / occurrences`.
    Sentiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmojiEntry {
    pub emoji: String,
    pub occurrences: u64,
    pub position: f64,
    pub negative: u64,
    pub neutral: u64,
    pub positive: u64,
    pub name: String,
}

impl EmojiEntry {
    pub fn sentiment(&self) -> f64 {
        if self.occurrences == 0 {
            return 0.0;
        }
        (self.positive as f64 - self.negative as f64) / self.occurrences as f64
    }
}

/// Emoji sentiment table keyed by normalized emoji.
#[derive(Debug, Clone, Default)]
pub struct EmojiRanking {
    entries: HashMap<String, EmojiEntry>,
    /// Scores from simple `emoji,score` tables.
    direct: HashMap<String, f64>,
    column: ScoreColumn,
}

fn decode_codepoints(s: &str) -> Option<String> {
    s.split([' ', '-', '_'])
        .filter(|p| !p.is_empty())
        .map(|p| {
            let hex = p
                .trim_start_matches("0x")
                .trim_start_matches("U+")
                .trim_start_matches("u+");
            u32::from_str_radix(hex, 16).ok().and_then(char::from_u32)
        })
        .collect()
}

impl EmojiRanking {
    pub fn bundled() -> &'static EmojiRanking {
        static TABLE: OnceLock<EmojiRanking> = OnceLock::new();
        TABLE.get_or_init(|| {
            EmojiRanking::from_csv(BUNDLED_RANKING.as_bytes())
                .expect("bundled emoji ranking is well-formed")
        })
    }

    /// Load either the published v1.0 layout (`Emoji, Unicode codepoint,
    /// Occurrences, Position, Negative, Neutral, Positive, Unicode name`) or
    /// a two-column `emoji,score` / `codepoints,score` table.
    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<Self, RankingError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()?
            .iter()
            .map(|h| h.trim().to_ascii_lowercase())
            .collect();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let emoji_col = col("emoji");
        let cp_col = col("unicode codepoint").or_else(|| col("codepoints"));
        if emoji_col.is_none() && cp_col.is_none() {
            return Err(RankingError::MissingKey);
        }
        let mut out = EmojiRanking::default();
        let published = col("position").is_some();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let entry_err = |message: String| RankingError::Entry { line, message };
            let key = match (cp_col.and_then(|c| rec.get(c)), emoji_col.and_then(|c| rec.get(c))) {
                (Some(cp), _) if !cp.trim().is_empty() => decode_codepoints(cp)
                    .ok_or_else(|| entry_err(format!("bad codepoints {cp:?}")))?,
                (_, Some(e)) => e.to_string(),
                _ => return Err(entry_err("no emoji key".into())),
            };
            let key = normalize(key.trim());
            let num = |name: &'static str| -> Result<f64, RankingError> {
                let c = col(name).ok_or(RankingError::MissingColumn(name))?;
                rec.get(c)
                    .unwrap_or("")
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| entry_err(format!("{name}: {e}")))
            };
            if published {
                let entry = EmojiEntry {
                    emoji: key.clone(),
                    occurrences: num("occurrences")? as u64,
                    position: num("position")?,
                    negative: num("negative")? as u64,
                    neutral: num("neutral")? as u64,
                    positive: num("positive")? as u64,
                    name: col("unicode name")
                        .and_then(|c| rec.get(c))
                        .unwrap_or("")
                        .to_string(),
                };
                out.entries.insert(key, entry);
            } else {
                let score = num("score")?;
                if !(-1.0..=1.0).contains(&score) {
                    return Err(entry_err(format!("score {score} outside [-1,1]")));
                }
                out.direct.insert(key, score);
            }
        }
        Ok(out)
    }

    pub fn with_column(mut self, column: ScoreColumn) -> Self {
        self.column = column;
        self
    }

    pub fn column(&self) -> ScoreColumn {
        self.column
    }

    pub fn entry(&self, emoji: &str) -> Option<&EmojiEntry> {
        self.entries.get(&normalize(emoji))
    }

    pub fn score(&self, emoji: &str) -> Option<f64> {
        let key = normalize(emoji);
        if let Some(&s) = self.direct.get(&key) {
            return Some(s);
        }
        self.entries.get(&key).map(|e| match self.column {
            ScoreColumn::Position => e.position,
            ScoreColumn::Sentiment => e.sentiment(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len() + self.direct.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EmojiStats {
    pub counts: BTreeMap<String, usize>,
    /// Count-weighted mean over emojis that have a ranking score.
    pub mean_score: Option<f64>,
    pub unscored: BTreeSet<String>,
}

pub fn emoji_stats(text: &str, ranking: &EmojiRanking) -> EmojiStats {
    let mut stats = EmojiStats::default();
    for e in extract_emojis(text) {
        *stats.counts.entry(e).or_default() += 1;
    }
    let (mut weighted, mut n) = (0.0, 0usize);
    for (e, &count) in &stats.counts {
        match ranking.score(e) {
            Some(s) => {
                weighted += s * count as f64;
                n += count;
            }
            None => {
                stats.unscored.insert(e.clone());
            }
        }
    }
    if n > 0 {
        stats.mean_score = Some(weighted / n as f64);
    }
    stats
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextField {
    Description,
    Posts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmojiCount {
    pub emoji: String,
    pub count: usize,
    pub score: Option<f64>,
}

/// Most frequent emojis in one text field across `channels`. Ties are
/// broken by codepoint order.
pub fn top_emojis<'a, I>(
    channels: I,
    field: TextField,
    ranking: &EmojiRanking,
    k: usize,
) -> Vec<EmojiCount>
where
    I: IntoIterator<Item = &'a ChannelRecord>,
{
    let mut counts: HashMap<String, usize> = HashMap::new();
    for ch in channels {
        let mut add = |text: &str| {
            for e in extract_emojis(text) {
                *counts.entry(e).or_default() += 1;
            }
        };
        match field {
            TextField::Description => add(&ch.description),
            TextField::Posts => ch.posts.iter().for_each(|p| add(&p.description)),
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    // UTF-8 byte order equals codepoint order.
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
        .into_iter()
        .map(|(emoji, count)| EmojiCount {
            score: ranking.score(&emoji),
            emoji,
            count,
        })
        .collect()
}
