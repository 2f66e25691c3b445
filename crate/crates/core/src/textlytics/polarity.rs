use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tokenize;

const BUNDLED_LEXICON: &str = include_str!("../../data/polarity_lexicon.csv");

/// Intensifiers add one unit of strength to the next sentiment word;
/// diminishers remove one.
const BOOSTERS: &[&str] = &[
    "very", "really", "extremely", "so", "super", "totally", "absolutely", "incredibly", "most",
    "too", "especially", "truly",
];
const DIMINISHERS: &[&str] = &["slightly", "somewhat", "barely", "kinda", "little", "bit"];
const NEGATORS: &[&str] = &[
    "not", "no", "never", "none", "nobody", "nothing", "neither", "nor", "without", "cannot",
    "can't", "cant", "don't", "dont", "doesn't", "doesnt", "didn't", "didnt", "isn't", "isnt",
    "wasn't", "wasnt", "aren't", "arent", "won't", "wont", "shouldn't", "wouldn't", "ain't",
];
/// Number of following tokens a negator applies to.
const NEGATION_WINDOW: usize = 3;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("lexicon line {line}: {message}")]
    Entry { line: usize, message: String },
}

/// Dual-scale polarity: strongest positive in 1..=5, strongest negative in
/// -5..=-1, and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolarityScore {
    pub positive: i8,
    pub negative: i8,
    pub combined: i8,
}

impl PolarityScore {
    pub const NEUTRAL: PolarityScore = PolarityScore {
        positive: 1,
        negative: -1,
        combined: 0,
    };

    fn new(positive: i8, negative: i8) -> Self {
        let positive = positive.clamp(1, 5);
        let negative = negative.clamp(-5, -1);
        PolarityScore {
            positive,
            negative,
            combined: positive + negative,
        }
    }
}

impl Default for PolarityScore {
    fn default() -> Self {
        PolarityScore::NEUTRAL
    }
}

#[derive(Debug, Clone, Default)]
pub struct PolarityScorer {
    words: HashMap<String, i8>,
    /// Multi-word entries keyed by their first token.
    phrases: HashMap<String, Vec<(Vec<String>, i8)>>,
    /// Entries ending in `*` match any token with that prefix.
    stems: Vec<(String, i8)>,
}

impl PolarityScorer {
    pub fn bundled() -> &'static PolarityScorer {
        static SCORER: OnceLock<PolarityScorer> = OnceLock::new();
        SCORER.get_or_init(|| {
            PolarityScorer::from_csv(BUNDLED_LEXICON.as_bytes())
                .expect("bundled polarity lexicon is well-formed")
        })
    }

    /// Load a `token,score` CSV with scores in -5..=5 (0 entries are ignored).
    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<Self, LexiconError> {
        let mut scorer = PolarityScorer::default();
        for (i, rec) in csv::Reader::from_reader(reader).records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let token = rec.get(0).unwrap_or("").trim().to_lowercase();
            let score: i8 = rec
                .get(1)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| LexiconError::Entry {
                    line,
                    message: format!("score: {e}"),
                })?;
            if token.is_empty() || !(-5..=5).contains(&score) {
                return Err(LexiconError::Entry {
                    line,
                    message: format!("bad entry {token:?} {score}"),
                });
            }
            if score == 0 {
                continue;
            }
            scorer.insert(&token, score);
        }
        Ok(scorer)
    }

    fn insert(&mut self, token: &str, score: i8) {
        if let Some(stem) = token.strip_suffix('*') {
            self.stems.push((stem.to_string(), score));
            return;
        }
        let parts = tokenize(token);
        match parts.len() {
            0 => {}
            1 => {
                self.words.insert(parts[0].clone(), score);
            }
            _ => self
                .phrases
                .entry(parts[0].clone())
                .or_default()
                .push((parts, score)),
        }
    }

    /// Lexicon strength of a single token, without context rules.
    pub fn word_score(&self, token: &str) -> Option<i8> {
        self.words.get(token).copied().or_else(|| {
            self.stems
                .iter()
                .filter(|(stem, _)| token.starts_with(stem.as_str()))
                .max_by_key(|(stem, _)| stem.len())
                .map(|&(_, s)| s)
        })
    }

    /// Longest lexicon match starting at `tokens[i]`: (score, tokens consumed).
    fn match_at(&self, tokens: &[String], i: usize) -> Option<(i8, usize)> {
        let phrase = self.phrases.get(&tokens[i]).and_then(|cands| {
            cands
                .iter()
                .filter(|(p, _)| tokens[i..].starts_with(p))
                .max_by_key(|(p, _)| p.len())
                .map(|(p, s)| (*s, p.len()))
        });
        phrase.or_else(|| self.word_score(&tokens[i]).map(|s| (s, 1)))
    }

    pub fn score(&self, text: &str) -> PolarityScore {
        let tokens = tokenize(text);
        let (mut best_pos, mut best_neg) = (1i8, -1i8);
        let mut boost = 0i8;
        let mut negated_until = 0usize;
        let mut i = 0;
        while i < tokens.len() {
            let tok = tokens[i].as_str();
            if NEGATORS.contains(&tok) {
                negated_until = i + 1 + NEGATION_WINDOW;
                i += 1;
                continue;
            }
            let Some((raw, used)) = self.match_at(&tokens, i) else {
                if BOOSTERS.contains(&tok) {
                    boost += 1;
                } else if DIMINISHERS.contains(&tok) {
                    boost -= 1;
                } else {
                    boost = 0;
                }
                i += 1;
                continue;
            };
            let magnitude = (raw.abs() + boost).clamp(1, 5);
            let mut strength = raw.signum() * magnitude;
            if i < negated_until {
                // A negated positive term turns negative at half strength; a
                // negated negative term becomes neutral.
                strength = if strength > 0 { -((strength + 1) / 2) } else { 0 };
            }
            if strength > 0 {
                best_pos = best_pos.max(strength);
            } else if strength < 0 {
                best_neg = best_neg.min(strength);
            }
            boost = 0;
            i += used;
        }
        PolarityScore::new(best_pos, best_neg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scorer() -> &'static PolarityScorer {
        PolarityScorer::bundled()
    }

    /// Max positive and min negative lexicon strength with no context rules.
    fn plain_oracle(text: &str) -> (i8, i8) {
        let mut pos = 1;
        let mut neg = -1;
        for tok in tokenize(text) {
            if let Some(s) = scorer().word_score(&tok) {
                pos = pos.max(s);
                neg = neg.min(s);
            }
        }
        (pos, neg)
    }

    #[test]
    fn empty_text_is_neutral() {
        assert_eq!(scorer().score(""), PolarityScore::NEUTRAL);
        assert_eq!(scorer().score("the channel uploads"), PolarityScore::NEUTRAL);
    }

    #[test]
    fn positive_and_negative_sentences_agree_with_plain_lexicon() {
        let s = scorer().score("I love this wonderful channel");
        assert!(s.combined > 0);
        let (p, n) = plain_oracle("I love this wonderful channel");
        assert_eq!((s.positive, s.negative), (p, n));

        let s = scorer().score("horrible scary videos");
        assert!(s.combined < 0);
        let (p, n) = plain_oracle("horrible scary videos");
        assert_eq!((s.positive, s.negative), (p, n));
    }

    #[test]
    fn booster_strengthens() {
        let plain = scorer().score("good");
        let boosted = scorer().score("very good");
        assert_eq!(boosted.positive, plain.positive + 1);
    }

    #[test]
    fn negation_flips_positive_and_neutralizes_negative() {
        let s = scorer().score("not good");
        assert_eq!(s.positive, 1);
        assert!(s.negative < -1);
        assert_eq!(scorer().score("not bad").negative, -1);
    }

    #[test]
    fn phrases_match_as_a_unit() {
        let mut scorer = PolarityScorer::default();
        scorer.insert("cool stuff", 3);
        scorer.insert("cool", 1);
        assert_eq!(scorer.score("such cool stuff").positive, 3);
        assert_eq!(scorer.score("cool").positive, 1);
    }

    #[test]
    fn stems_match_prefixes() {
        let scorer = PolarityScorer::from_csv("token,score\nscar*,-3\n".as_bytes()).unwrap();
        assert_eq!(scorer.score("scariest").negative, -3);
    }

    #[test]
    fn out_of_range_entries_rejected() {
        assert!(PolarityScorer::from_csv("token,score\nx,9\n".as_bytes()).is_err());
    }

    #[test]
    fn combined_stays_in_range() {
        let s = scorer().score("extremely superb outstanding but catastrophic horrific torture");
        assert!((1..=5).contains(&s.positive));
        assert!((-5..=-1).contains(&s.negative));
        assert_eq!(s.combined, s.positive + s.negative);
    }
}
