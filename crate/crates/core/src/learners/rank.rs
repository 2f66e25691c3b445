use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{LearnerError, TrainedModel};
use crate::features::{ChannelInputs, FeatureGroup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    #[default]
    Prob,
    ProbTimesCount,
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "prob" => Ok(Severity::Prob),
            "prob_times_count" => Ok(Severity::ProbTimesCount),
            other => Err(format!("unknown severity {other:?}")),
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Prob => "prob",
            Severity::ProbTimesCount => "prob_times_count",
        })
    }
}

/// Change in P(disturbing) when a group's features are replaced by their
/// training means. Positive values push toward "disturbing".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAttribution {
    pub group: String,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedChannel {
    pub channel_id: String,
    pub score: f64,
    pub probability: f64,
    pub disturbing_videos: Option<u32>,
    pub attributions: Vec<GroupAttribution>,
    /// Optional record fields the spec needed but the record lacked; they
    /// were scored with neutral encodings.
    pub missing_fields: Vec<String>,
}

fn group_name(feature: &str) -> String {
    FeatureGroup::of_feature(feature)
        .map(|g| g.prefix().to_string())
        .unwrap_or_else(|| "other".into())
}

fn attributions(model: &TrainedModel, row: &[f64], p: f64) -> Vec<GroupAttribution> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (j, name) in model.feature_names.iter().enumerate() {
        groups.entry(group_name(name)).or_default().push(j);
    }
    let mut out: Vec<GroupAttribution> = groups
        .into_iter()
        .map(|(group, cols)| {
            let mut masked = row.to_vec();
            for j in cols {
                masked[j] = model.feature_means[j];
            }
            GroupAttribution {
                group,
                contribution: p - model.prob_unchecked(&masked),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.contribution
            .abs()
            .total_cmp(&a.contribution.abs())
            .then_with(|| a.group.cmp(&b.group))
    });
    out
}

fn order(a: &RankedChannel, b: &RankedChannel) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.channel_id.cmp(&b.channel_id))
}

/// Score precomputed vectors. Ordered by severity descending, ties by
/// channel id. Under `ProbTimesCount` a channel's probability is multiplied
/// by its known disturbing-video count when one is supplied.
pub fn rank_vectors(
    model: &TrainedModel,
    ids: &[String],
    rows: &[Vec<f64>],
    severity: Severity,
    counts: Option<&BTreeMap<String, u32>>,
) -> Result<Vec<RankedChannel>, LearnerError> {
    if ids.len() != rows.len() {
        return Err(LearnerError::Shape(format!(
            "{} ids but {} rows",
            ids.len(),
            rows.len()
        )));
    }
    let mut ranked = ids
        .par_iter()
        .zip(rows)
        .map(|(id, row)| {
            let p = model.predict_proba(row)?[1];
            let count = counts.and_then(|c| c.get(id)).copied();
            let score = match (severity, count) {
                (Severity::ProbTimesCount, Some(c)) => p * c as f64,
                _ => p,
            };
            Ok(RankedChannel {
                channel_id: id.clone(),
                score,
                probability: p,
                disturbing_videos: count,
                attributions: attributions(model, row, p),
                missing_fields: Vec::new(),
            })
        })
        .collect::<Result<Vec<_>, LearnerError>>()?;
    ranked.sort_by(order);
    Ok(ranked)
}

/// Extract features with the model's embedded pipeline and rank.
pub fn rank_channels(
    model: &TrainedModel,
    inputs: &[ChannelInputs],
    severity: Severity,
    counts: Option<&BTreeMap<String, u32>>,
) -> Result<Vec<RankedChannel>, LearnerError> {
    let pipeline = model.pipeline.as_ref().ok_or(LearnerError::NoPipeline)?;
    let ids: Vec<String> = inputs.iter().map(|i| i.record.channel_id.clone()).collect();
    let rows: Vec<Vec<f64>> = inputs.par_iter().map(|i| pipeline.transform(i)).collect();
    let mut ranked = rank_vectors(model, &ids, &rows, severity, counts)?;
    let uses = |name: &str| pipeline.raw_names.iter().any(|n| n == name);
    let by_id: BTreeMap<&str, &ChannelInputs> =
        inputs.iter().map(|i| (i.record.channel_id.as_str(), i)).collect();
    for r in &mut ranked {
        let rec = &by_id[r.channel_id.as_str()].record;
        if rec.subscriber_count.is_none() && uses("activity.subscriber_count") {
            r.missing_fields.push("subscriber_count".into());
        }
        if rec.made_for_kids.is_none() && uses("mfk.flag_set") {
            r.missing_fields.push("made_for_kids".into());
        }
    }
    Ok(ranked)
}
