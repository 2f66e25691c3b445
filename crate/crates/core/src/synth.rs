//! Synthetic corpus generator with a planted class signal.
//!
//! Each channel is assigned a class first (about 42% disturbing, the
//! 559:779 ratio of the reference data) and its ground-truth videos are
//! drawn to match: suitable channels get only suitable videos (plus the odd
//! irrelevant one), disturbing channels get at least one disturbing video.
//!
//! The signal is carried by:
//!
//! * keywords: each keyword comes from the channel's class pool with
//!   probability `strength`, otherwise from the other class's pool; a few
//!   neutral keywords appear in both;
//! * description polarity and emotions: each description sentence uses a
//!   positive phrase for suitable channels and a negative one for disturbing
//!   channels with probability `strength`;
//! * activity counts (views, videos, subscribers, subscriptions, posts and
//!   post text), via class-dependent log-normal means.
//!
//! With [`SignalPlacement::CreationTime`] only keywords and description carry
//! the signal; counts, posts and video removals are drawn from one shared
//! distribution, so a model restricted to creation-time features should lose
//! almost nothing against the full model.
//!
//! Output is a pure function of the config: the same seed gives the same
//! corpus byte for byte.

use chrono::{Days, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    ChannelClass, ChannelRecord, Corpus, LinkedPlatform, PostRecord, RemovalReason, StatusReport,
    VideoLabel, VideoRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalPlacement {
    /// Counts, keywords, description text and posts.
    #[default]
    Everywhere,
    /// Keywords and description text only.
    CreationTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub channels: usize,
    pub disturbing_share: f64,
    /// Probability that a keyword or description sentence follows the
    /// channel's class rather than the other class.
    pub strength: f64,
    pub placement: SignalPlacement,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            channels: 1400,
            disturbing_share: 559.0 / 1338.0,
            strength: 0.7,
            placement: SignalPlacement::Everywhere,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn creation_time(seed: u64) -> Self {
        SynthConfig {
            placement: SignalPlacement::CreationTime,
            seed,
            ..Default::default()
        }
    }
}

const SUITABLE_KEYWORDS: [&str; 7] = [
    "nursery rhymes",
    "learning",
    "abc",
    "education",
    "toys",
    "family",
    "fun",
];
const DISTURBING_KEYWORDS: [&str; 7] = [
    "prank",
    "superhero",
    "challenge",
    "scary",
    "spiderman",
    "elsa",
    "joker",
];
const NEUTRAL_KEYWORDS: [&str; 3] = ["kids", "cartoon", "animation"];

const POSITIVE_PHRASES: [&str; 8] = [
    "happy songs that kids love",
    "a wonderful place to learn and smile",
    "fun and friendly stories for the whole family",
    "great videos full of joy",
    "amazing colors and happy friends",
    "safe and wonderful cartoons",
    "we love to learn together",
    "awesome games with a big smile",
];
const NEGATIVE_PHRASES: [&str; 8] = [
    "scary stories with angry monsters",
    "evil villains fight and kill",
    "crazy pranks that make babies cry",
    "terrible shock endings",
    "heroes hate the evil joker",
    "angry fights and scary chases",
    "the villain wants to kill everyone",
    "crazy scary surprises",
];
const NEUTRAL_PHRASES: [&str; 5] = [
    "new episodes every week",
    "subscribe for more videos",
    "made with our own characters",
    "watch the full playlist",
    "animation for children",
];

const SUITABLE_EMOJIS: [&str; 3] = ["😊", "❤", "🎉"];
const DISTURBING_EMOJIS: [&str; 3] = ["😱", "💀", "😈"];

const TOPICS: [&str; 5] = [
    "https://en.wikipedia.org/wiki/Entertainment",
    "https://en.wikipedia.org/wiki/Film",
    "https://en.wikipedia.org/wiki/Music",
    "https://en.wikipedia.org/wiki/Video_game_culture",
    "https://en.wikipedia.org/wiki/Hobby",
];
const PLATFORMS: [&str; 4] = ["facebook", "instagram", "twitter", "tiktok"];

struct Gen<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
}

impl Gen<'_> {
    fn follows_class(&mut self) -> bool {
        self.rng.random_bool(self.cfg.strength.clamp(0.0, 1.0))
    }

    /// Whether count-type fields should depend on the class.
    fn counts_informative(&self) -> bool {
        self.cfg.placement == SignalPlacement::Everywhere
    }

    fn pick<'s>(&mut self, items: &[&'s str]) -> &'s str {
        items.choose(&mut self.rng).expect("non-empty pool")
    }

    /// Pool for `class`, or for the other class when the draw goes against it.
    fn class_pool<'s>(&mut self, class: ChannelClass, suitable: &'s [&'s str], disturbing: &'s [&'s str]) -> &'s [&'s str] {
        let own = self.follows_class();
        match (class, own) {
            (ChannelClass::Suitable, true) | (ChannelClass::Disturbing, false) => suitable,
            _ => disturbing,
        }
    }

    fn lognormal(&mut self, mu: f64, sigma: f64) -> u64 {
        let d = LogNormal::new(mu, sigma).expect("valid log-normal");
        d.sample(&mut self.rng).round().min(1e15) as u64
    }

    fn poisson(&mut self, lambda: f64) -> u64 {
        Poisson::new(lambda).expect("positive rate").sample(&mut self.rng) as u64
    }

    fn keywords(&mut self, class: ChannelClass) -> Vec<String> {
        let n = self.rng.random_range(3..=8);
        let mut out: Vec<String> = Vec::with_capacity(n);
        for _ in 0..n {
            let word = if self.rng.random_bool(0.2) {
                self.pick(&NEUTRAL_KEYWORDS)
            } else {
                let pool = self.class_pool(class, &SUITABLE_KEYWORDS, &DISTURBING_KEYWORDS);
                self.pick(pool)
            };
            if !out.iter().any(|k| k == word) {
                out.push(word.to_string());
            }
        }
        out
    }

    fn description(&mut self, class: ChannelClass) -> String {
        let n = self.rng.random_range(1..=4);
        let mut sentences = Vec::with_capacity(n + 1);
        for _ in 0..n {
            let pool = self.class_pool(class, &POSITIVE_PHRASES, &NEGATIVE_PHRASES);
            let mut s = capitalize(self.pick(pool));
            if self.rng.random_bool(0.3) {
                let emojis = self.class_pool(class, &SUITABLE_EMOJIS, &DISTURBING_EMOJIS);
                s.push(' ');
                s.push_str(self.pick(emojis));
            }
            sentences.push(s);
        }
        sentences.push(capitalize(self.pick(&NEUTRAL_PHRASES)));
        sentences.join(". ") + "."
    }

    fn posts(&mut self, class: ChannelClass, count: u64, published: NaiveDate) -> Vec<PostRecord> {
        let informative = self.counts_informative();
        let n = count.min(5);
        // Newest first, as the community tab lists them.
        (0..n)
            .map(|k| {
                let text = if informative {
                    let pool = self.class_pool(class, &POSITIVE_PHRASES, &NEGATIVE_PHRASES);
                    let emojis = self.class_pool(class, &SUITABLE_EMOJIS, &DISTURBING_EMOJIS);
                    format!("{} {}", capitalize(self.pick(pool)), self.pick(emojis))
                } else {
                    capitalize(self.pick(&NEUTRAL_PHRASES))
                };
                PostRecord {
                    date_published: published + Days::new(30 * (n - k)),
                    description: text,
                    tags: Vec::new(),
                    hashtags: Vec::new(),
                    external_links: Vec::new(),
                    youtube_links: Vec::new(),
                    channel_links: Vec::new(),
                    like_count: self.poisson(20.0),
                    thumbnail_video: None,
                }
            })
            .collect()
    }

    fn channel(&mut self, i: usize, class: ChannelClass) -> ChannelRecord {
        let base = NaiveDate::from_ymd_opt(2006, 1, 1).expect("valid date");
        let published = base + Days::new(self.rng.random_range(0..5000));
        let id = format!("UCsynth{i:06}");
        let mut c = ChannelRecord::skeleton(id.clone(), published);
        let shift = if self.counts_informative() && class == ChannelClass::Disturbing {
            1.0
        } else {
            0.0
        };

        c.keywords = self.keywords(class);
        let description = self.description(class);
        c.set_description(description);
        let n_topics = self.rng.random_range(0..=2);
        c.topic_categories = (0..n_topics).map(|_| self.pick(&TOPICS).to_string()).collect();
        c.topic_categories.dedup();
        c.made_for_kids = match self.rng.random_range(0..10) {
            0..=1 => None,
            2..=5 => Some(true),
            _ => Some(false),
        };
        c.country = Some(self.pick(&["US", "GB", "IN", "BR", "DE"]).to_string());
        c.email_present = self.rng.random_bool(0.3);

        c.view_count = self.lognormal(14.0 - 1.5 * shift, 2.0);
        c.video_count = self.lognormal(4.5 - 0.8 * shift, 1.2).max(1);
        let subscribers = self.lognormal(9.0 - 1.5 * shift, 2.0);
        if self.rng.random_bool(0.1) {
            c.hidden_subscribers = true;
            c.subscriber_count = None;
        } else {
            c.subscriber_count = Some(subscribers);
        }
        c.subscription_count = self.poisson(3.0 + 4.0 * shift);
        c.post_count = if c.made_for_kids == Some(true) {
            0
        } else {
            self.poisson(6.0 + 6.0 * shift)
        };
        c.posts = self.posts(class, c.post_count, published);

        let n_links = self.rng.random_range(0..=3);
        for _ in 0..n_links {
            let platform = self.pick(&PLATFORMS);
            if c.linked_platforms.iter().all(|l| l.platform != platform) {
                c.linked_platforms.push(LinkedPlatform {
                    platform: platform.to_string(),
                    url: format!("https://www.{platform}.com/{id}"),
                });
            }
        }
        c.links_count = c.linked_platforms.len() as u64;
        c
    }

    fn videos(&mut self, channel: &ChannelRecord, class: ChannelClass) -> Vec<VideoRecord> {
        let n = self.rng.random_range(1..=4usize);
        let disturbing = match class {
            ChannelClass::Suitable => 0,
            ChannelClass::Disturbing => self.rng.random_range(1..=n),
        };
        let mut labels: Vec<VideoLabel> = (0..n)
            .map(|k| {
                if k < disturbing {
                    VideoLabel::Disturbing
                } else {
                    VideoLabel::Suitable
                }
            })
            .collect();
        if self.rng.random_bool(0.1) {
            labels.push(VideoLabel::Irrelevant);
        }
        let removal = if self.counts_informative() {
            [0.002, 0.4]
        } else {
            [0.1, 0.1]
        };
        labels
            .into_iter()
            .enumerate()
            .map(|(k, label)| {
                let p = match label {
                    VideoLabel::Disturbing => removal[1],
                    _ => removal[0],
                };
                let status = if self.rng.random_bool(p) {
                    StatusReport::removed(
                        RemovalReason::AccountTerminated,
                        Some("This account has been terminated.".into()),
                    )
                } else {
                    StatusReport::available()
                };
                VideoRecord {
                    video_id: format!("{}v{k}", channel.channel_id),
                    channel_id: channel.channel_id.clone(),
                    label,
                    made_for_kids: channel.made_for_kids.or(Some(self.rng.random_bool(0.5))),
                    status,
                    content_score: None,
                }
            })
            .collect()
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Generate a labeled corpus. Channel `i` is disturbing for the first
/// `round(channels * disturbing_share)` positions of a seeded shuffle.
pub fn generate(cfg: &SynthConfig) -> Corpus {
    let mut g = Gen {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    let n_disturbing = (cfg.channels as f64 * cfg.disturbing_share.clamp(0.0, 1.0)).round() as usize;
    let mut classes: Vec<ChannelClass> = (0..cfg.channels)
        .map(|i| {
            if i < n_disturbing {
                ChannelClass::Disturbing
            } else {
                ChannelClass::Suitable
            }
        })
        .collect();
    rand::seq::SliceRandom::shuffle(classes.as_mut_slice(), &mut g.rng);
    let mut channels = Vec::with_capacity(cfg.channels);
    let mut videos = Vec::new();
    for (i, class) in classes.into_iter().enumerate() {
        let c = g.channel(i, class);
        videos.extend(g.videos(&c, class));
        channels.push(c);
    }
    Corpus::new(channels, videos).expect("generated ids are unique")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::propagate_labels;
    use crate::textlytics::PolarityScorer;

    fn small(placement: SignalPlacement) -> SynthConfig {
        SynthConfig {
            channels: 200,
            placement,
            ..Default::default()
        }
    }

    #[test]
    fn class_counts_follow_share() {
        let corpus = generate(&SynthConfig::default());
        let labels = propagate_labels(&corpus);
        assert_eq!(corpus.len(), 1400);
        assert!(labels.excluded.is_empty());
        assert_eq!(labels.count(ChannelClass::Disturbing), 585);
        assert_eq!(labels.count(ChannelClass::Suitable), 815);
    }

    #[test]
    fn records_are_valid() {
        let corpus = generate(&small(SignalPlacement::Everywhere));
        for c in corpus.channels() {
            c.check().unwrap();
            if c.made_for_kids == Some(true) {
                assert!(c.posts.is_empty());
            }
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = generate(&small(SignalPlacement::Everywhere));
        let b = generate(&small(SignalPlacement::Everywhere));
        assert_eq!(a, b);
        let mut other = small(SignalPlacement::Everywhere);
        other.seed += 1;
        assert_ne!(a, generate(&other));
    }

    fn mean_by_class(corpus: &Corpus, f: impl Fn(&ChannelRecord) -> f64) -> [f64; 2] {
        let labels = propagate_labels(corpus);
        let mut sum = [0.0; 2];
        let mut n = [0.0; 2];
        for c in corpus.channels() {
            let k = labels.get(&c.channel_id).unwrap().value.index();
            sum[k] += f(c);
            n[k] += 1.0;
        }
        [sum[0] / n[0], sum[1] / n[1]]
    }

    #[test]
    fn description_polarity_separates_classes() {
        let scorer = PolarityScorer::bundled();
        for placement in [SignalPlacement::Everywhere, SignalPlacement::CreationTime] {
            let corpus = generate(&small(placement));
            let pos = mean_by_class(&corpus, |c| scorer.score(&c.description).positive as f64);
            let neg = mean_by_class(&corpus, |c| scorer.score(&c.description).negative as f64);
            assert!(pos[0] - pos[1] > 0.5, "{placement:?}: {pos:?}");
            assert!(neg[0] - neg[1] > 0.5, "{placement:?}: {neg:?}");
        }
    }

    #[test]
    fn creation_time_placement_leaves_counts_uninformative() {
        let corpus = generate(&SynthConfig::creation_time(3));
        let m = mean_by_class(&corpus, |c| (c.view_count as f64).ln_1p());
        assert!((m[0] - m[1]).abs() < 0.3, "{m:?}");
        let full = generate(&SynthConfig {
            seed: 3,
            ..Default::default()
        });
        let m = mean_by_class(&full, |c| (c.view_count as f64).ln_1p());
        assert!(m[0] - m[1] > 1.0, "{m:?}");
    }
}
