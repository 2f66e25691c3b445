//! KS screening of count features and information-gain feature ranking.

use std::path::Path;

use anyhow::{bail, Context, Result};
use audit_core::corpus::{ChannelClass, ChannelRecord};
use audit_core::features::FeatureMatrix;
use audit_core::stats::{ecdf_report, info_gain_rank, ks_two_sample, KsMethod};
use serde::Serialize;

use crate::data::{labels_for, open_corpus};

#[derive(Serialize)]
struct KsRow {
    feature: String,
    /// Matrix column the values came from, when run on a matrix.
    #[serde(skip_serializing_if = "Option::is_none")]
    column: Option<String>,
    p_value: f64,
    d_statistic: f64,
    method: KsMethod,
    n_suitable: usize,
    n_disturbing: usize,
}

#[derive(Serialize)]
struct KsReport {
    source: &'static str,
    rows: Vec<KsRow>,
}

type Extract = fn(&ChannelRecord) -> Option<f64>;

/// Count-based channel characteristics, by display name.
const RECORD_FEATURES: [(&str, Extract); 8] = [
    ("videoCount", |c| Some(c.video_count as f64)),
    ("viewCount", |c| Some(c.view_count as f64)),
    ("subscriptionCount", |c| Some(c.subscription_count as f64)),
    ("subscriberCount", |c| c.subscriber_count.map(|n| n as f64)),
    ("descriptionCharCount", |c| Some(c.description_char_count as f64)),
    ("keywordsCount", |c| Some(c.keywords.len() as f64)),
    ("topicCount", |c| Some(c.topic_categories.len() as f64)),
    ("postCount", |c| Some(c.post_count as f64)),
];

/// The same characteristics as matrix columns. The KS statistic is
/// unchanged by the monotone log transform applied during extraction.
const MATRIX_COLUMNS: [(&str, &str); 7] = [
    ("videoCount", "activity.video_count"),
    ("viewCount", "activity.view_count"),
    ("subscriptionCount", "graph.subscription_count"),
    ("subscriberCount", "activity.subscriber_count"),
    ("descriptionCharCount", "activity.description_char_count"),
    ("keywordsCount", "activity.keyword_count"),
    ("postCount", "activity.post_count"),
];

struct Samples {
    feature: String,
    column: Option<String>,
    suitable: Vec<f64>,
    disturbing: Vec<f64>,
}

fn from_corpus(path: &Path) -> Result<Vec<Samples>> {
    let corpus = open_corpus(path)?;
    let labels = labels_for(&corpus, None)?;
    Ok(RECORD_FEATURES
        .iter()
        .map(|(name, extract)| {
            let mut s = Samples {
                feature: name.to_string(),
                column: None,
                suitable: Vec::new(),
                disturbing: Vec::new(),
            };
            for c in corpus.channels() {
                let (Some(label), Some(v)) = (labels.get(&c.channel_id), extract(c)) else {
                    continue;
                };
                match label.value {
                    ChannelClass::Suitable => s.suitable.push(v),
                    ChannelClass::Disturbing => s.disturbing.push(v),
                }
            }
            s
        })
        .collect())
}

fn from_matrix(path: &Path) -> Result<Vec<Samples>> {
    let m = FeatureMatrix::load(path).with_context(|| format!("loading {}", path.display()))?;
    let col = |name: &str| m.names.iter().position(|n| n == name);
    let hidden = col("graph.hidden_subscribers");
    let mut out = Vec::new();
    for (feature, column) in MATRIX_COLUMNS {
        let Some(j) = col(column) else {
            log::info!("{column} not in the matrix; skipping {feature}");
            continue;
        };
        let mut s = Samples {
            feature: feature.to_string(),
            column: Some(column.to_string()),
            suitable: Vec::new(),
            disturbing: Vec::new(),
        };
        for (row, label) in m.rows.iter().zip(&m.labels) {
            // Hidden subscriber counts carry a placeholder, not a count.
            if feature == "subscriberCount" && hidden.is_some_and(|h| row[h] > 0.5) {
                continue;
            }
            match label {
                Some(ChannelClass::Suitable) => s.suitable.push(row[j]),
                Some(ChannelClass::Disturbing) => s.disturbing.push(row[j]),
                None => {}
            }
        }
        out.push(s);
    }
    Ok(out)
}

pub fn stats(
    matrix: Option<&Path>,
    corpus: Option<&Path>,
    report: &Path,
    ecdf_dir: Option<&Path>,
) -> Result<()> {
    let (source, samples) = match (matrix, corpus) {
        (Some(m), _) => ("matrix", from_matrix(m)?),
        (None, Some(c)) => ("corpus", from_corpus(c)?),
        (None, None) => bail!("give --matrix or --corpus"),
    };
    if let Some(dir) = ecdf_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut rows = Vec::new();
    println!("{:<22} {:>12} {:>12}", "Feature", "p-value", "D-statistic");
    for s in samples {
        if s.suitable.is_empty() || s.disturbing.is_empty() {
            log::warn!("{}: a class has no values; skipped", s.feature);
            continue;
        }
        let r = ks_two_sample(&s.suitable, &s.disturbing)?;
        println!("{:<22} {:>12.3e} {:>12.5}", s.feature, r.p_value, r.d_statistic);
        if let Some(dir) = ecdf_dir {
            let table = ecdf_report(&s.feature, &s.suitable, &s.disturbing)?;
            let path = dir.join(format!("ecdf_{}.json", s.feature));
            std::fs::write(&path, serde_json::to_string_pretty(&table)?)?;
        }
        rows.push(KsRow {
            feature: s.feature,
            column: s.column,
            p_value: r.p_value,
            d_statistic: r.d_statistic,
            method: r.method,
            n_suitable: r.n1,
            n_disturbing: r.n2,
        });
    }
    std::fs::write(report, serde_json::to_string_pretty(&KsReport { source, rows })?)?;
    Ok(())
}

pub fn rank_features(matrix: &Path, folds: usize, seed: u64, out: &Path) -> Result<()> {
    let m = FeatureMatrix::load(matrix)
        .with_context(|| format!("loading {}", matrix.display()))?
        .labeled();
    let ranked = info_gain_rank(&m.rows, &m.names, &m.classes()?, folds, seed)?;
    for (i, r) in ranked.iter().take(20).enumerate() {
        println!("{:>3}  {:<40} {:.4}", i + 1, r.name, r.mean_info_gain);
    }
    std::fs::write(out, serde_json::to_string_pretty(&ranked)?)?;
    Ok(())
}
