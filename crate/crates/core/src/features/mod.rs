//! Channel feature extraction: eleven feature groups, corpus vocabularies
//! for the "top-k" groups, and a persisted preprocessing pipeline.

mod pipeline;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ChannelClass, ChannelRecord, Corpus, LabelSet, VideoRecord};
use crate::textlytics::{ChannelSentiment, Emotion, EmotionError, TextAnalyzer};

pub use pipeline::{
    preprocess, sidecar_path, DroppedFeature, FeatureMatrix, FeaturePipeline, FeatureVector,
    Preprocessed, PIPELINE_VERSION,
};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("log transform field {0:?} is not a fixed numeric feature")]
    UnknownLogField(String),
    #[error("variance floor must be a finite non-negative number, got {0}")]
    BadFloor(f64),
    #[error("no active feature groups")]
    NoGroups,
    #[error("every feature fell below the variance floor")]
    AllDropped,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in feature {0}")]
    NonFinite(String),
    #[error("pipeline version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("bad matrix file: {0}")]
    Format(String),
}

impl FeatureError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        FeatureError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Activity,
    Graph,
    MadeForKids,
    Media,
    Keywords,
    Emotions,
    Topics,
    EmojiScores,
    EmojisDescription,
    EmojisPosts,
    Polarity,
}

const ACTIVITY: [&str; 6] = [
    "view_count",
    "video_count",
    "subscriber_count",
    "post_count",
    "description_char_count",
    "keyword_count",
];
const GRAPH: [&str; 3] = ["subscription_count", "hidden_subscribers", "links_count"];
const MFK: [&str; 4] = ["flag_set", "flag_true", "gt_video_ratio", "removed_video_ratio"];
const EMOJI_SCORES: [&str; 2] = ["description", "posts"];
const POLARITY: [&str; 6] = [
    "description_pos",
    "description_neg",
    "keywords_pos",
    "keywords_neg",
    "posts_pos",
    "posts_neg",
];

/// Sum of all group sizes.
pub const TOTAL_FEATURES: usize = 81;

/// Name prefixes of features that depend on channel activity (counts that
/// grow after creation, uploaded videos, community posts). A creation-time
/// spec never emits a feature matching one of these.
pub const ACTIVITY_DERIVED: [&str; 10] = [
    "activity.view_count",
    "activity.video_count",
    "activity.subscriber_count",
    "activity.post_count",
    "graph.subscription_count",
    "mfk.gt_video_ratio",
    "mfk.removed_video_ratio",
    "emoji_score.posts",
    "emoji_posts.",
    "polarity.posts_",
];

pub fn is_activity_derived(name: &str) -> bool {
    ACTIVITY_DERIVED.iter().any(|p| name.starts_with(p))
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 11] = [
        FeatureGroup::Activity,
        FeatureGroup::Graph,
        FeatureGroup::MadeForKids,
        FeatureGroup::Media,
        FeatureGroup::Keywords,
        FeatureGroup::Emotions,
        FeatureGroup::Topics,
        FeatureGroup::EmojiScores,
        FeatureGroup::EmojisDescription,
        FeatureGroup::EmojisPosts,
        FeatureGroup::Polarity,
    ];

    /// Feature-name prefix, before the dot.
    pub fn prefix(self) -> &'static str {
        match self {
            FeatureGroup::Activity => "activity",
            FeatureGroup::Graph => "graph",
            FeatureGroup::MadeForKids => "mfk",
            FeatureGroup::Media => "media",
            FeatureGroup::Keywords => "keyword",
            FeatureGroup::Emotions => "emotion",
            FeatureGroup::Topics => "topic",
            FeatureGroup::EmojiScores => "emoji_score",
            FeatureGroup::EmojisDescription => "emoji_desc",
            FeatureGroup::EmojisPosts => "emoji_posts",
            FeatureGroup::Polarity => "polarity",
        }
    }

    /// Number of features with a full vocabulary.
    pub fn size(self) -> usize {
        match self {
            FeatureGroup::Activity => 6,
            FeatureGroup::Graph => 3,
            FeatureGroup::MadeForKids => 4,
            FeatureGroup::Media => 11,
            FeatureGroup::Keywords => 10,
            FeatureGroup::Emotions => 8,
            FeatureGroup::Topics => 11,
            FeatureGroup::EmojiScores => 2,
            FeatureGroup::EmojisDescription => 10,
            FeatureGroup::EmojisPosts => 10,
            FeatureGroup::Polarity => 6,
        }
    }

    pub fn vocab_field(self) -> Option<VocabField> {
        match self {
            FeatureGroup::Media => Some(VocabField::Media),
            FeatureGroup::Keywords => Some(VocabField::Keywords),
            FeatureGroup::Topics => Some(VocabField::Topics),
            FeatureGroup::EmojisDescription => Some(VocabField::EmojisDescription),
            FeatureGroup::EmojisPosts => Some(VocabField::EmojisPosts),
            _ => None,
        }
    }

    fn fixed_names(self) -> Option<Vec<&'static str>> {
        Some(match self {
            FeatureGroup::Activity => ACTIVITY.to_vec(),
            FeatureGroup::Graph => GRAPH.to_vec(),
            FeatureGroup::MadeForKids => MFK.to_vec(),
            FeatureGroup::Emotions => Emotion::ALL.iter().map(|e| e.as_str()).collect(),
            FeatureGroup::EmojiScores => EMOJI_SCORES.to_vec(),
            FeatureGroup::Polarity => POLARITY.to_vec(),
            _ => return None,
        })
    }

    /// Group owning a feature name, by prefix.
    pub fn of_feature(name: &str) -> Option<FeatureGroup> {
        let prefix = name.split('.').next()?;
        FeatureGroup::ALL.into_iter().find(|g| g.prefix() == prefix)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VocabField {
    Keywords,
    Topics,
    Media,
    EmojisDescription,
    EmojisPosts,
}

impl VocabField {
    /// Vocabulary length. Media keeps one slot for "other".
    pub fn k(self) -> usize {
        match self {
            VocabField::Keywords => 10,
            VocabField::Topics => 11,
            VocabField::Media => 10,
            VocabField::EmojisDescription | VocabField::EmojisPosts => 10,
        }
    }

    /// Per-channel occurrence counts of the field's items.
    fn items(self, input: &ChannelInputs) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        let r = &input.record;
        let mut add = |s: String| {
            if !s.is_empty() {
                *out.entry(s).or_default() += 1;
            }
        };
        match self {
            VocabField::Keywords => r.keywords.iter().for_each(|k| add(k.trim().to_lowercase())),
            VocabField::Topics => r.topic_categories.iter().for_each(|t| add(t.trim().to_string())),
            VocabField::Media => r
                .linked_platforms
                .iter()
                .for_each(|p| add(p.platform.trim().to_lowercase())),
            VocabField::EmojisDescription => return input.sentiment.description_emojis.counts.clone(),
            VocabField::EmojisPosts => return input.sentiment.posts_emojis.counts.clone(),
        }
        out
    }

    /// Text-list fields rank by the number of channels using an item; emoji
    /// fields rank by total occurrences.
    fn weight(self, count: usize) -> usize {
        match self {
            VocabField::EmojisDescription | VocabField::EmojisPosts => count,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VideoSummary {
    pub total: usize,
    pub made_for_kids: usize,
    pub removed: usize,
    pub removed_made_for_kids: usize,
}

impl VideoSummary {
    pub fn of<'a>(videos: impl IntoIterator<Item = &'a VideoRecord>) -> Self {
        let mut s = VideoSummary::default();
        for v in videos {
            let mfk = v.made_for_kids == Some(true);
            s.total += 1;
            s.made_for_kids += mfk as usize;
            if !v.status.available {
                s.removed += 1;
                s.removed_made_for_kids += mfk as usize;
            }
        }
        s
    }
}

/// Everything feature extraction reads about one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelInputs {
    pub record: ChannelRecord,
    pub sentiment: ChannelSentiment,
    pub videos: VideoSummary,
}

/// Run text analytics on every channel, in parallel, preserving corpus order.
pub fn prepare_inputs(
    corpus: &Corpus,
    analyzer: &TextAnalyzer,
) -> Result<Vec<ChannelInputs>, EmotionError> {
    corpus
        .channels()
        .par_iter()
        .map(|ch| {
            Ok(ChannelInputs {
                sentiment: analyzer.analyze(ch)?,
                videos: VideoSummary::of(corpus.videos_of(&ch.channel_id)),
                record: ch.clone(),
            })
        })
        .collect()
}

/// Keep the channels that carry a label, paired with their class, in input
/// order.
pub fn labeled_inputs(
    inputs: Vec<ChannelInputs>,
    labels: &LabelSet,
) -> (Vec<ChannelInputs>, Vec<ChannelClass>) {
    inputs
        .into_iter()
        .filter_map(|i| {
            let class = labels.get(&i.record.channel_id)?.value;
            Some((i, class))
        })
        .unzip()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub active_groups: Vec<FeatureGroup>,
    pub log_transform_fields: Vec<String>,
    pub variance_floor: f64,
    pub creation_time_only: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        let mut log_transform_fields: Vec<String> = ACTIVITY
            .iter()
            .map(|n| format!("activity.{n}"))
            .collect();
        log_transform_fields.push("graph.links_count".into());
        FeatureSpec {
            active_groups: FeatureGroup::ALL.to_vec(),
            log_transform_fields,
            variance_floor: 1e-6,
            creation_time_only: false,
        }
    }
}

impl FeatureSpec {
    /// All groups, restricted to features known when a channel is created.
    pub fn creation_time() -> Self {
        FeatureSpec {
            creation_time_only: true,
            ..FeatureSpec::default()
        }
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if !(self.variance_floor.is_finite() && self.variance_floor >= 0.0) {
            return Err(FeatureError::BadFloor(self.variance_floor));
        }
        if self.active_groups.is_empty() {
            return Err(FeatureError::NoGroups);
        }
        for f in &self.log_transform_fields {
            let known = FeatureGroup::of_feature(f)
                .and_then(|g| g.fixed_names().map(|names| (g, names)))
                .is_some_and(|(g, names)| {
                    names.iter().any(|n| format!("{}.{n}", g.prefix()) == *f)
                });
            if !known {
                return Err(FeatureError::UnknownLogField(f.clone()));
            }
        }
        Ok(())
    }

    pub fn is_active(&self, group: FeatureGroup) -> bool {
        self.active_groups.contains(&group)
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let text = std::fs::read_to_string(path).map_err(|e| FeatureError::io(path, e))?;
        let spec: FeatureSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Feature names in vector order before variance filtering.
    pub fn feature_names(&self, vocab: &Vocabulary) -> Vec<String> {
        let mut names = Vec::new();
        for g in FeatureGroup::ALL.into_iter().filter(|g| self.is_active(*g)) {
            let p = g.prefix();
            match (g.fixed_names(), g.vocab_field()) {
                (Some(fixed), _) => names.extend(fixed.iter().map(|n| format!("{p}.{n}"))),
                (None, Some(field)) => {
                    names.extend(vocab.get(field).iter().map(|n| format!("{p}.{n}")));
                    if field == VocabField::Media {
                        names.push("media.other".into());
                    }
                }
                (None, None) => unreachable!("every group has fixed names or a vocabulary"),
            }
        }
        if self.creation_time_only {
            names.retain(|n| !is_activity_derived(n));
        }
        names
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Vocabulary {
    pub keywords: Vec<String>,
    pub topics: Vec<String>,
    pub media: Vec<String>,
    pub emojis_description: Vec<String>,
    pub emojis_posts: Vec<String>,
}

impl Vocabulary {
    pub fn get(&self, field: VocabField) -> &[String] {
        match field {
            VocabField::Keywords => &self.keywords,
            VocabField::Topics => &self.topics,
            VocabField::Media => &self.media,
            VocabField::EmojisDescription => &self.emojis_description,
            VocabField::EmojisPosts => &self.emojis_posts,
        }
    }

    /// Vocabularies for every vocabulary-backed group in `spec`.
    pub fn build(inputs: &[ChannelInputs], spec: &FeatureSpec) -> Self {
        let mut v = Vocabulary::default();
        for g in &spec.active_groups {
            if let Some(field) = g.vocab_field() {
                let items = build_vocabulary(inputs, field, field.k());
                match field {
                    VocabField::Keywords => v.keywords = items,
                    VocabField::Topics => v.topics = items,
                    VocabField::Media => v.media = items,
                    VocabField::EmojisDescription => v.emojis_description = items,
                    VocabField::EmojisPosts => v.emojis_posts = items,
                }
            }
        }
        v
    }
}

/// Top-`k` items of `field` by corpus frequency, ties in lexicographic order.
/// Shorter than `k` when the corpus has fewer distinct items.
pub fn build_vocabulary<'a>(
    inputs: impl IntoIterator<Item = &'a ChannelInputs>,
    field: VocabField,
    k: usize,
) -> Vec<String> {
    let mut freq: HashMap<String, usize> = HashMap::new();
    for input in inputs {
        for (item, count) in field.items(input) {
            *freq.entry(item).or_default() += field.weight(count);
        }
    }
    let mut ranked: Vec<(String, usize)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.into_iter().take(k).map(|(s, _)| s).collect()
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Raw feature values in `spec.feature_names(vocab)` order, with the spec's
/// log transforms applied.
pub fn extract(input: &ChannelInputs, spec: &FeatureSpec, vocab: &Vocabulary) -> Vec<f64> {
    let r = &input.record;
    let s = &input.sentiment;
    let mut named: Vec<(String, f64)> = Vec::new();
    let mut push = |group: FeatureGroup, name: &str, v: f64| {
        named.push((format!("{}.{name}", group.prefix()), v));
    };
    for g in FeatureGroup::ALL.into_iter().filter(|g| spec.is_active(*g)) {
        match g {
            FeatureGroup::Activity => {
                let vals = [
                    r.view_count as f64,
                    r.video_count as f64,
                    r.subscriber_count.unwrap_or(0) as f64,
                    r.post_count as f64,
                    r.description_char_count as f64,
                    r.keywords.len() as f64,
                ];
                ACTIVITY.iter().zip(vals).for_each(|(n, v)| push(g, n, v));
            }
            FeatureGroup::Graph => {
                let hidden = r.hidden_subscribers || r.subscriber_count.is_none();
                push(g, "subscription_count", r.subscription_count as f64);
                push(g, "hidden_subscribers", hidden as u8 as f64);
                push(g, "links_count", r.links_count as f64);
            }
            FeatureGroup::MadeForKids => {
                let v = &input.videos;
                push(g, "flag_set", r.made_for_kids.is_some() as u8 as f64);
                push(g, "flag_true", (r.made_for_kids == Some(true)) as u8 as f64);
                push(g, "gt_video_ratio", ratio(v.made_for_kids, v.total));
                push(g, "removed_video_ratio", ratio(v.removed_made_for_kids, v.removed));
            }
            FeatureGroup::Emotions => {
                for e in Emotion::ALL {
                    push(g, e.as_str(), s.description_emotions.get(e));
                }
            }
            FeatureGroup::EmojiScores => {
                push(g, "description", s.description_emojis.mean_score.unwrap_or(0.0));
                push(g, "posts", s.posts_emojis.mean_score.unwrap_or(0.0));
            }
            FeatureGroup::Polarity => {
                let d = s.description_polarity;
                let k = s.keywords_polarity;
                let p = s.posts_polarity;
                push(g, "description_pos", d.positive as f64);
                push(g, "description_neg", d.negative as f64);
                push(g, "keywords_pos", k.positive as f64);
                push(g, "keywords_neg", k.negative as f64);
                push(g, "posts_pos", p.positive);
                push(g, "posts_neg", p.negative);
            }
            FeatureGroup::Media
            | FeatureGroup::Keywords
            | FeatureGroup::Topics
            | FeatureGroup::EmojisDescription
            | FeatureGroup::EmojisPosts => {
                let field = g.vocab_field().expect("vocabulary group");
                let items = field.items(input);
                let words = vocab.get(field);
                for w in words {
                    push(g, w, items.get(w).copied().unwrap_or(0) as f64);
                }
                if field == VocabField::Media {
                    let other: usize = items
                        .iter()
                        .filter(|(k, _)| !words.contains(k))
                        .map(|(_, c)| c)
                        .sum();
                    push(g, "other", other as f64);
                }
            }
        }
    }
    if spec.creation_time_only {
        named.retain(|(n, _)| !is_activity_derived(n));
    }
    named
        .into_iter()
        .map(|(n, v)| {
            if spec.log_transform_fields.contains(&n) {
                v.ln_1p()
            } else {
                v
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LinkedPlatform, RemovalReason, StatusReport, VideoLabel};
    use crate::textlytics::TextAnalyzer;
    use chrono::NaiveDate;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2019, 3, 1).unwrap()
    }

    fn inputs(record: ChannelRecord) -> ChannelInputs {
        ChannelInputs {
            sentiment: TextAnalyzer::bundled().analyze(&record).unwrap(),
            videos: VideoSummary::default(),
            record,
        }
    }

    fn with_keywords(id: &str, kws: &[&str]) -> ChannelInputs {
        let mut r = ChannelRecord::skeleton(id, date());
        r.keywords = kws.iter().map(|s| s.to_string()).collect();
        inputs(r)
    }

    fn value(input: &ChannelInputs, spec: &FeatureSpec, vocab: &Vocabulary, name: &str) -> f64 {
        let names = spec.feature_names(vocab);
        let i = names.iter().position(|n| n == name).unwrap_or_else(|| panic!("{name}"));
        extract(input, spec, vocab)[i]
    }

    #[test]
    fn group_sizes_sum_to_total() {
        let total: usize = FeatureGroup::ALL.iter().map(|g| g.size()).sum();
        assert_eq!(total, TOTAL_FEATURES);
        for g in FeatureGroup::ALL {
            if let Some(names) = g.fixed_names() {
                assert_eq!(names.len(), g.size(), "{g:?}");
            }
            if let Some(f) = g.vocab_field() {
                let extra = (f == VocabField::Media) as usize;
                assert_eq!(f.k() + extra, g.size(), "{g:?}");
            }
        }
    }

    #[test]
    fn full_vocabulary_gives_81_features() {
        let vocab = Vocabulary {
            keywords: (0..10).map(|i| format!("k{i}")).collect(),
            topics: (0..11).map(|i| format!("t{i}")).collect(),
            media: (0..10).map(|i| format!("m{i}")).collect(),
            emojis_description: (0..10).map(|i| format!("d{i}")).collect(),
            emojis_posts: (0..10).map(|i| format!("p{i}")).collect(),
        };
        let spec = FeatureSpec::default();
        assert_eq!(spec.feature_names(&vocab).len(), TOTAL_FEATURES);
        let input = with_keywords("c", &["k1"]);
        assert_eq!(extract(&input, &spec, &vocab).len(), TOTAL_FEATURES);
    }

    #[test]
    fn most_frequent_keyword_ranks_first() {
        let mut corpus = Vec::new();
        for i in 0..70 {
            corpus.push(with_keywords(&format!("a{i}"), &["kids"]));
        }
        for i in 0..47 {
            corpus.push(with_keywords(&format!("b{i}"), &["Toys"]));
        }
        for i in 0..30 {
            corpus.push(with_keywords(&format!("c{i}"), &["fun", "fun"]));
        }
        let v = build_vocabulary(&corpus, VocabField::Keywords, 10);
        assert_eq!(v, vec!["kids", "toys", "fun"]);
    }

    #[test]
    fn vocabulary_ties_break_lexicographically() {
        let corpus: Vec<_> = (0..5)
            .flat_map(|i| {
                [
                    with_keywords(&format!("x{i}"), &["zebra"]),
                    with_keywords(&format!("y{i}"), &["apple"]),
                ]
            })
            .collect();
        assert_eq!(build_vocabulary(&corpus, VocabField::Keywords, 10), vec!["apple", "zebra"]);
        assert!(build_vocabulary(&[], VocabField::Topics, 11).is_empty());
    }

    #[test]
    fn zero_views_log_to_zero() {
        let spec = FeatureSpec::default();
        let input = with_keywords("c", &[]);
        let vocab = Vocabulary::default();
        assert_eq!(value(&input, &spec, &vocab, "activity.view_count"), 0.0);
        let mut r = input.record.clone();
        r.view_count = 99;
        let v = value(&inputs(r), &spec, &vocab, "activity.view_count");
        assert!((v - 100f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn made_for_kids_ratios() {
        let mut v1 = VideoRecord {
            video_id: "v1".into(),
            channel_id: "c".into(),
            label: VideoLabel::Suitable,
            made_for_kids: Some(true),
            status: StatusReport::available(),
            content_score: None,
        };
        let mut v2 = v1.clone();
        v2.video_id = "v2".into();
        let mut input = with_keywords("c", &[]);
        input.videos = VideoSummary::of([&v1, &v2]);
        let spec = FeatureSpec::default();
        let vocab = Vocabulary::default();
        assert_eq!(value(&input, &spec, &vocab, "mfk.gt_video_ratio"), 1.0);
        assert_eq!(value(&input, &spec, &vocab, "mfk.removed_video_ratio"), 0.0);

        v1.status = StatusReport::removed(RemovalReason::AccountTerminated, None);
        v2.made_for_kids = Some(false);
        input.videos = VideoSummary::of([&v1, &v2]);
        assert_eq!(value(&input, &spec, &vocab, "mfk.gt_video_ratio"), 0.5);
        assert_eq!(value(&input, &spec, &vocab, "mfk.removed_video_ratio"), 1.0);
    }

    #[test]
    fn made_for_kids_flag_is_two_booleans() {
        let spec = FeatureSpec::default();
        let vocab = Vocabulary::default();
        for (flag, want) in [(None, (0.0, 0.0)), (Some(false), (1.0, 0.0)), (Some(true), (1.0, 1.0))] {
            let mut r = ChannelRecord::skeleton("c", date());
            r.made_for_kids = flag;
            let input = inputs(r);
            let got = (
                value(&input, &spec, &vocab, "mfk.flag_set"),
                value(&input, &spec, &vocab, "mfk.flag_true"),
            );
            assert_eq!(got, want);
        }
    }

    #[test]
    fn heart_description_scores_its_table_value() {
        let mut r = ChannelRecord::skeleton("c", date());
        r.set_description("hello ❤");
        let input = inputs(r);
        let v = value(&input, &FeatureSpec::default(), &Vocabulary::default(), "emoji_score.description");
        assert_eq!(format!("{v:.3}"), "0.747");
    }

    #[test]
    fn hidden_subscribers_encode_as_zero_and_flag() {
        let mut r = ChannelRecord::skeleton("c", date());
        r.subscriber_count = None;
        r.hidden_subscribers = true;
        let input = inputs(r);
        let spec = FeatureSpec::default();
        let vocab = Vocabulary::default();
        assert_eq!(value(&input, &spec, &vocab, "activity.subscriber_count"), 0.0);
        assert_eq!(value(&input, &spec, &vocab, "graph.hidden_subscribers"), 1.0);
    }

    #[test]
    fn media_counts_and_other_bucket() {
        let mut r = ChannelRecord::skeleton("c", date());
        for (p, u) in [
            ("Facebook", "https://facebook.com/x"),
            ("instagram", "https://instagram.com/x"),
            ("vk", "https://vk.com/x"),
        ] {
            r.linked_platforms.push(LinkedPlatform {
                platform: p.into(),
                url: u.into(),
            });
        }
        let input = inputs(r);
        let vocab = Vocabulary {
            media: vec!["facebook".into(), "instagram".into()],
            ..Default::default()
        };
        let spec = FeatureSpec::default();
        assert_eq!(value(&input, &spec, &vocab, "media.facebook"), 1.0);
        assert_eq!(value(&input, &spec, &vocab, "media.other"), 1.0);
    }

    #[test]
    fn creation_time_spec_has_no_activity_features() {
        let vocab = Vocabulary {
            emojis_posts: vec!["❤".into()],
            ..Default::default()
        };
        let names = FeatureSpec::creation_time().feature_names(&vocab);
        assert!(names.iter().all(|n| !is_activity_derived(n)));
        assert!(names.contains(&"activity.description_char_count".to_string()));
        assert!(names.contains(&"polarity.description_pos".to_string()));
        for gone in ["activity.view_count", "graph.subscription_count", "emoji_posts.❤", "polarity.posts_neg"] {
            assert!(!names.contains(&gone.to_string()), "{gone}");
        }
        let input = with_keywords("c", &[]);
        assert_eq!(extract(&input, &FeatureSpec::creation_time(), &vocab).len(), names.len());
    }

    #[test]
    fn spec_validation() {
        let mut spec = FeatureSpec::default();
        assert!(spec.validate().is_ok());
        spec.log_transform_fields.push("keyword.kids".into());
        assert!(matches!(spec.validate(), Err(FeatureError::UnknownLogField(_))));
        let spec = FeatureSpec {
            variance_floor: -1.0,
            ..FeatureSpec::default()
        };
        assert!(matches!(spec.validate(), Err(FeatureError::BadFloor(_))));
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = FeatureSpec::creation_time();
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<FeatureSpec>(&text).unwrap(), spec);
        assert!(text.contains("\"made_for_kids\""));
    }
}
