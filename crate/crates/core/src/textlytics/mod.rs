//! Text analytics over channel descriptions, keywords and posts: polarity on
//! a dual positive/negative scale, eight-emotion profiles, and emoji
//! extraction scored against a sentiment ranking table.

mod emoji;
mod emotion;
mod polarity;

use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

use crate::corpus::ChannelRecord;

pub use emoji::{
    emoji_stats, extract_emojis, is_emoji, top_emojis, EmojiCount, EmojiEntry, EmojiRanking,
    EmojiStats, RankingError, ScoreColumn, TextField,
};
pub use emotion::{
    Emotion, EmotionError, EmotionProfile, EmotionProvider, HttpEmotionProvider, LexiconEmotions,
};
pub use polarity::{LexiconError, PolarityScore, PolarityScorer};

/// Lowercased word tokens. Apostrophes inside words are kept ("don't").
pub(crate) fn tokenize(text: &str) -> Vec<String> {
    text.unicode_words().map(|w| w.to_lowercase()).collect()
}

/// Mean of per-post polarity, or the neutral baseline when there are no posts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanPolarity {
    pub positive: f64,
    pub negative: f64,
    pub combined: f64,
}

impl MeanPolarity {
    pub fn of(scores: &[PolarityScore]) -> Self {
        if scores.is_empty() {
            let n = PolarityScore::NEUTRAL;
            return MeanPolarity {
                positive: n.positive as f64,
                negative: n.negative as f64,
                combined: 0.0,
            };
        }
        let k = scores.len() as f64;
        MeanPolarity {
            positive: scores.iter().map(|s| s.positive as f64).sum::<f64>() / k,
            negative: scores.iter().map(|s| s.negative as f64).sum::<f64>() / k,
            combined: scores.iter().map(|s| s.combined as f64).sum::<f64>() / k,
        }
    }
}

/// Per-channel text analytics consumed by feature extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSentiment {
    pub channel_id: String,
    pub description_polarity: PolarityScore,
    pub keywords_polarity: PolarityScore,
    pub posts_polarity: MeanPolarity,
    pub description_emotions: EmotionProfile,
    pub description_emojis: EmojiStats,
    pub posts_emojis: EmojiStats,
}

/// Bundles the three analyzers so a channel can be processed in one call.
pub struct TextAnalyzer {
    pub polarity: PolarityScorer,
    pub emotions: Box<dyn EmotionProvider>,
    pub emojis: EmojiRanking,
}

impl TextAnalyzer {
    /// Analyzer backed by the bundled lexicons and ranking table.
    pub fn bundled() -> Self {
        TextAnalyzer {
            polarity: PolarityScorer::bundled().clone(),
            emotions: Box::new(LexiconEmotions::bundled().clone()),
            emojis: EmojiRanking::bundled().clone(),
        }
    }

    pub fn analyze(&self, channel: &ChannelRecord) -> Result<ChannelSentiment, EmotionError> {
        let post_scores: Vec<_> = channel
            .posts
            .iter()
            .map(|p| self.polarity.score(&p.description))
            .collect();
        let post_text: Vec<&str> = channel.posts.iter().map(|p| p.description.as_str()).collect();
        Ok(ChannelSentiment {
            channel_id: channel.channel_id.clone(),
            description_polarity: self.polarity.score(&channel.description),
            keywords_polarity: self.polarity.score(&channel.keywords.join(" ")),
            posts_polarity: MeanPolarity::of(&post_scores),
            description_emotions: self.emotions.profile(&channel.description)?,
            description_emojis: emoji_stats(&channel.description, &self.emojis),
            posts_emojis: emoji_stats(&post_text.join("\n"), &self.emojis),
        })
    }
}
