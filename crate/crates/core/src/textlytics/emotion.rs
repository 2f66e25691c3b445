use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tokenize;

const BUNDLED_LEXICON: &str = include_str!("../../data/emotion_lexicon.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emotion {
    Trust,
    Surprise,
    Sadness,
    Joy,
    Fear,
    Disgust,
    Anticipation,
    Anger,
}

impl Emotion {
    pub const ALL: [Emotion; 8] = [
        Emotion::Trust,
        Emotion::Surprise,
        Emotion::Sadness,
        Emotion::Joy,
        Emotion::Fear,
        Emotion::Disgust,
        Emotion::Anticipation,
        Emotion::Anger,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Emotion::Trust => "trust",
            Emotion::Surprise => "surprise",
            Emotion::Sadness => "sadness",
            Emotion::Joy => "joy",
            Emotion::Fear => "fear",
            Emotion::Disgust => "disgust",
            Emotion::Anticipation => "anticipation",
            Emotion::Anger => "anger",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Emotion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        Emotion::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| format!("unknown emotion {s:?}"))
    }
}

/// One value in `[0, 1]` per emotion.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EmotionProfile([f64; 8]);

impl EmotionProfile {
    pub fn zero() -> Self {
        EmotionProfile([0.0; 8])
    }

    pub fn get(&self, e: Emotion) -> f64 {
        self.0[e.index()]
    }

    pub fn set(&mut self, e: Emotion, v: f64) {
        self.0[e.index()] = v;
    }

    pub fn values(&self) -> [f64; 8] {
        self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl Serialize for EmotionProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(8))?;
        for e in Emotion::ALL {
            map.serialize_entry(e.as_str(), &self.get(e))?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for EmotionProfile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw: HashMap<String, f64> = HashMap::deserialize(d)?;
        let mut p = EmotionProfile::zero();
        for (k, v) in raw {
            let e: Emotion = k.parse().map_err(serde::de::Error::custom)?;
            if !(0.0..=1.0).contains(&v) {
                return Err(serde::de::Error::custom(format!("{e} = {v} outside [0,1]")));
            }
            p.set(e, v);
        }
        Ok(p)
    }
}

#[derive(Debug, Error)]
pub enum EmotionError {
    /// The provider could not be reached; distinct from "no emotion found".
    #[error("emotion provider unreachable: {0}")]
    Transport(String),
    #[error("emotion provider returned an unusable response: {0}")]
    Protocol(String),
}

pub trait EmotionProvider: Send + Sync {
    fn profile(&self, text: &str) -> Result<EmotionProfile, EmotionError>;
}

/// Offline provider: each emotion's share of the (token, emotion)
/// associations matched in the text.
#[derive(Debug, Clone, Default)]
pub struct LexiconEmotions {
    lexicon: HashMap<String, Vec<Emotion>>,
}

impl LexiconEmotions {
    pub fn bundled() -> &'static LexiconEmotions {
        static LEX: OnceLock<LexiconEmotions> = OnceLock::new();
        LEX.get_or_init(|| {
            LexiconEmotions::from_csv(BUNDLED_LEXICON.as_bytes())
                .expect("bundled emotion lexicon is well-formed")
        })
    }

    /// Load a `token,emotion` CSV; a token may appear on several rows.
    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<Self, csv::Error> {
        let mut lexicon: HashMap<String, Vec<Emotion>> = HashMap::new();
        for (i, rec) in csv::Reader::from_reader(reader).records().enumerate() {
            let rec = rec?;
            let (Some(tok), Some(emo)) = (rec.get(0), rec.get(1)) else {
                continue;
            };
            let emotion: Emotion = emo.parse().map_err(|m: String| {
                csv::Error::from(std::io::Error::other(format!("line {}: {m}", i + 2)))
            })?;
            let entry = lexicon.entry(tok.trim().to_lowercase()).or_default();
            if !entry.contains(&emotion) {
                entry.push(emotion);
            }
        }
        Ok(LexiconEmotions { lexicon })
    }

    fn lookup(&self, token: &str) -> Option<&[Emotion]> {
        self.lexicon
            .get(token)
            .or_else(|| token.strip_suffix('s').and_then(|t| self.lexicon.get(t)))
            .map(Vec::as_slice)
    }
}

impl EmotionProvider for LexiconEmotions {
    fn profile(&self, text: &str) -> Result<EmotionProfile, EmotionError> {
        let mut counts = [0usize; 8];
        for tok in tokenize(text) {
            for e in self.lookup(&tok).unwrap_or_default() {
                counts[e.index()] += 1;
            }
        }
        let total: usize = counts.iter().sum();
        let mut profile = EmotionProfile::zero();
        if total > 0 {
            for e in Emotion::ALL {
                profile.set(e, counts[e.index()] as f64 / total as f64);
            }
        }
        Ok(profile)
    }
}

/// Adapter for an external emotion-detection service.
///
/// Sends `POST {endpoint}` with `{"text": ...}` and expects
/// `{"emotions": {"anger": 0.1, ...}}` back; missing emotions read as 0.
pub struct HttpEmotionProvider {
    endpoint: String,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct EmotionResponse {
    emotions: EmotionProfile,
}

impl HttpEmotionProvider {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpEmotionProvider {
            endpoint: endpoint.into(),
            agent,
        }
    }
}

impl EmotionProvider for HttpEmotionProvider {
    fn profile(&self, text: &str) -> Result<EmotionProfile, EmotionError> {
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(serde_json::json!({ "text": text }))
            .map_err(|e| EmotionError::Transport(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(EmotionError::Protocol(format!("status {}", resp.status())));
        }
        let body: EmotionResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| EmotionError::Protocol(e.to_string()))?;
        Ok(body.emotions)
    }
}
