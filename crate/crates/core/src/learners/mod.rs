//! Classifiers, cross-validated evaluation and channel ranking. Labels are
//! binary with 0 = suitable and 1 = disturbing.

mod boost;
mod eval;
mod forest;
mod linear;
mod metrics;
mod mlp;
mod rank;
mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ChannelClass;
use crate::features::{FeatureError, FeaturePipeline};
use crate::folds::FoldError;

pub use boost::{LogitBoost, LogitBoostParams};
pub use eval::{
    evaluate_creation_time, evaluate_cv, evaluate_pipeline_cv, EvalReport, FoldSummary,
    DECISION_THRESHOLD,
};
pub use forest::{ForestParams, RandomForest};
pub use linear::{GaussianNb, LogisticParams, LogisticRegression, NaiveBayesParams, Standardizer};
pub use metrics::{auc_rank, auc_trapezoid, roc_curve, ClassMetrics, Confusion};
pub use mlp::{Mlp, MlpParams};
pub use rank::{rank_channels, rank_vectors, GroupAttribution, RankedChannel, Severity};
pub use tree::{Tree, TreeParams};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("no training samples")]
    Empty,
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Folds(#[from] FoldError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error("model format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("model has no feature pipeline; it was trained from a bare matrix")]
    NoPipeline,
    #[error("{0}")]
    Invalid(String),
}

fn io_err(path: &Path, source: std::io::Error) -> LearnerError {
    LearnerError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    RandomForest,
    LogisticRegression,
    NaiveBayes,
    Mlp,
    LogitboostMeta,
    AvgprobEnsemble,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::RandomForest,
        ModelKind::LogisticRegression,
        ModelKind::NaiveBayes,
        ModelKind::Mlp,
        ModelKind::LogitboostMeta,
        ModelKind::AvgprobEnsemble,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::RandomForest => "random_forest",
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::NaiveBayes => "naive_bayes",
            ModelKind::Mlp => "mlp",
            ModelKind::LogitboostMeta => "logitboost_meta",
            ModelKind::AvgprobEnsemble => "avgprob_ensemble",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "rf" | "random_forest" => ModelKind::RandomForest,
            "lr" | "logistic_regression" => ModelKind::LogisticRegression,
            "nb" | "naive_bayes" => ModelKind::NaiveBayes,
            "mlp" | "nn" => ModelKind::Mlp,
            "logitboost" | "logitboost_meta" => ModelKind::LogitboostMeta,
            "avgprob" | "avgprob_ensemble" => ModelKind::AvgprobEnsemble,
            other => return Err(format!("unknown model kind {other:?}")),
        })
    }
}

/// Base learners that can sit inside the probability-averaging ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Member {
    RandomForest,
    BalancedRandomForest,
    LogisticRegression,
    NaiveBayes,
    Mlp,
    Logitboost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub forest: ForestParams,
    pub logistic: LogisticParams,
    pub naive_bayes: NaiveBayesParams,
    pub mlp: MlpParams,
    pub logitboost: LogitBoostParams,
    pub ensemble: Vec<Member>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            forest: ForestParams::default(),
            logistic: LogisticParams::default(),
            naive_bayes: NaiveBayesParams::default(),
            mlp: MlpParams::default(),
            logitboost: LogitBoostParams::default(),
            ensemble: vec![
                Member::RandomForest,
                Member::LogisticRegression,
                Member::NaiveBayes,
                Member::BalancedRandomForest,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "fitted", rename_all = "snake_case")]
enum Model {
    RandomForest(RandomForest),
    LogisticRegression(LogisticRegression),
    NaiveBayes(GaussianNb),
    Mlp(Mlp),
    Logitboost(LogitBoost),
    AvgProb(Vec<Model>),
}

impl Model {
    fn predict(&self, row: &[f64]) -> f64 {
        match self {
            Model::RandomForest(m) => m.predict(row),
            Model::LogisticRegression(m) => m.predict(row),
            Model::NaiveBayes(m) => m.predict(row),
            Model::Mlp(m) => m.predict(row),
            Model::Logitboost(m) => m.predict(row),
            Model::AvgProb(ms) => {
                ms.iter().map(|m| m.predict(row)).sum::<f64>() / ms.len() as f64
            }
        }
    }

    fn fit_member(member: Member, x: &[Vec<f64>], y: &[f64], p: &Hyperparams, seed: u64) -> Model {
        match member {
            Member::RandomForest => Model::RandomForest(RandomForest::fit(x, y, &p.forest, seed)),
            Member::BalancedRandomForest => {
                let fp = ForestParams {
                    balanced: true,
                    ..p.forest
                };
                Model::RandomForest(RandomForest::fit(x, y, &fp, seed))
            }
            Member::LogisticRegression => {
                Model::LogisticRegression(LogisticRegression::fit(x, y, &p.logistic))
            }
            Member::NaiveBayes => Model::NaiveBayes(GaussianNb::fit(x, y, &p.naive_bayes)),
            Member::Mlp => Model::Mlp(Mlp::fit(x, y, &p.mlp, seed)),
            Member::Logitboost => Model::Logitboost(LogitBoost::fit(x, y, &p.logitboost, seed)),
        }
    }

    fn fit(kind: ModelKind, x: &[Vec<f64>], y: &[f64], p: &Hyperparams, seed: u64) -> Model {
        let member = match kind {
            ModelKind::RandomForest => Member::RandomForest,
            ModelKind::LogisticRegression => Member::LogisticRegression,
            ModelKind::NaiveBayes => Member::NaiveBayes,
            ModelKind::Mlp => Member::Mlp,
            ModelKind::LogitboostMeta => Member::Logitboost,
            ModelKind::AvgprobEnsemble => {
                return Model::AvgProb(
                    p.ensemble
                        .iter()
                        .enumerate()
                        .map(|(i, &m)| Model::fit_member(m, x, y, p, seed.wrapping_add(i as u64)))
                        .collect(),
                )
            }
        };
        Model::fit_member(member, x, y, p, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub samples: usize,
    /// Suitable and disturbing counts.
    pub class_counts: [usize; 2],
    /// Stamped by the caller; training itself is timeless so that the same
    /// inputs and seed give the same bytes.
    pub trained_at: Option<String>,
}

/// A fitted classifier with everything needed to score new channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub kind: ModelKind,
    pub params: Hyperparams,
    pub feature_names: Vec<String>,
    pub pipeline: Option<FeaturePipeline>,
    /// Training column means, the baseline for group attributions.
    pub feature_means: Vec<f64>,
    pub meta: TrainingMeta,
    model: Model,
}

pub(crate) fn check_training_set(
    rows: &[Vec<f64>],
    labels: &[ChannelClass],
    width: usize,
) -> Result<(), LearnerError> {
    if rows.is_empty() {
        return Err(LearnerError::Empty);
    }
    if rows.len() != labels.len() {
        return Err(LearnerError::Shape(format!(
            "{} rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(LearnerError::Shape(format!(
                "row {i} has {} values, expected {width}",
                r.len()
            )));
        }
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(LearnerError::NonFinite { row: i, col });
        }
    }
    let first = labels[0];
    if labels.iter().all(|&l| l == first) {
        return Err(LearnerError::SingleClass);
    }
    Ok(())
}

/// Fit a model of `kind` on `rows` whose columns are named by
/// `feature_names`.
pub fn train(
    kind: ModelKind,
    feature_names: &[String],
    rows: &[Vec<f64>],
    labels: &[ChannelClass],
    params: &Hyperparams,
    seed: u64,
) -> Result<TrainedModel, LearnerError> {
    check_training_set(rows, labels, feature_names.len())?;
    if kind == ModelKind::AvgprobEnsemble && params.ensemble.is_empty() {
        return Err(LearnerError::Invalid("ensemble has no members".into()));
    }
    let y: Vec<f64> = labels.iter().map(|l| l.index() as f64).collect();
    let n = rows.len() as f64;
    let feature_means = (0..feature_names.len())
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    let mut class_counts = [0; 2];
    labels.iter().for_each(|l| class_counts[l.index()] += 1);
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        kind,
        params: params.clone(),
        feature_names: feature_names.to_vec(),
        pipeline: None,
        feature_means,
        meta: TrainingMeta {
            seed,
            samples: rows.len(),
            class_counts,
            trained_at: None,
        },
        model: Model::fit(kind, rows, &y, params, seed),
    })
}

impl TrainedModel {
    /// Attach the pipeline that produced the training columns.
    pub fn with_pipeline(mut self, pipeline: FeaturePipeline) -> Result<Self, LearnerError> {
        if pipeline.names != self.feature_names {
            return Err(LearnerError::Shape(
                "pipeline columns differ from the model's features".into(),
            ));
        }
        self.pipeline = Some(pipeline);
        Ok(self)
    }

    /// `[P(suitable), P(disturbing)]`.
    pub fn predict_proba(&self, row: &[f64]) -> Result<[f64; 2], LearnerError> {
        if row.len() != self.feature_names.len() {
            return Err(LearnerError::Shape(format!(
                "got {} values for {} features",
                row.len(),
                self.feature_names.len()
            )));
        }
        if let Some(col) = row.iter().position(|v| !v.is_finite()) {
            return Err(LearnerError::NonFinite { row: 0, col });
        }
        let p = self.model.predict(row).clamp(0.0, 1.0);
        Ok([1.0 - p, p])
    }

    pub(crate) fn prob_unchecked(&self, row: &[f64]) -> f64 {
        self.model.predict(row).clamp(0.0, 1.0)
    }

    pub fn predict_class(&self, row: &[f64]) -> Result<ChannelClass, LearnerError> {
        let p = self.predict_proba(row)?[1];
        Ok(if p > DECISION_THRESHOLD {
            ChannelClass::Disturbing
        } else {
            ChannelClass::Suitable
        })
    }

    /// Member probabilities of an averaging ensemble, empty otherwise.
    pub fn member_probabilities(&self, row: &[f64]) -> Vec<f64> {
        match &self.model {
            Model::AvgProb(ms) => ms.iter().map(|m| m.predict(row)).collect(),
            _ => Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LearnerError> {
        #[derive(Deserialize)]
        struct Probe {
            format_version: u32,
        }
        let probe: Probe = serde_json::from_str(text)?;
        if probe.format_version != MODEL_FORMAT_VERSION {
            return Err(LearnerError::Version {
                found: probe.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let m: TrainedModel = serde_json::from_str(text)?;
        if m.feature_means.len() != m.feature_names.len() {
            return Err(LearnerError::Invalid("feature means and names differ in length".into()));
        }
        if let Some(p) = &m.pipeline {
            p.check()?;
            if p.names != m.feature_names {
                return Err(LearnerError::Invalid(
                    "embedded pipeline disagrees with the model's features".into(),
                ));
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), LearnerError> {
        std::fs::write(path, self.to_json()).map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, LearnerError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use ChannelClass::*;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("f{i}")).collect()
    }

    fn toy(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<ChannelClass>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = if i % 2 == 0 { Suitable } else { Disturbing };
            let shift = c.index() as f64 * 1.5;
            rows.push(vec![
                rng.random_range(0.0..2.0) + shift,
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..2.0) - shift,
            ]);
            labels.push(c);
        }
        (rows, labels)
    }

    fn fast_params() -> Hyperparams {
        Hyperparams {
            forest: ForestParams {
                trees: 20,
                ..Default::default()
            },
            mlp: MlpParams {
                hidden: 8,
                epochs: 60,
                ..Default::default()
            },
            logitboost: LogitBoostParams {
                rounds: 10,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn every_kind_outputs_a_distribution() {
        let (rows, labels) = toy(40, 1);
        for kind in ModelKind::ALL {
            let m = train(kind, &names(3), &rows, &labels, &fast_params(), 5).unwrap();
            for r in &rows {
                let p = m.predict_proba(r).unwrap();
                assert!((0.0..=1.0).contains(&p[1]), "{kind}");
                assert!((p[0] + p[1] - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn forest_bytes_are_reproducible() {
        let (rows, labels) = toy(20, 2);
        let a = train(ModelKind::RandomForest, &names(3), &rows, &labels, &Hyperparams::default(), 9).unwrap();
        let b = train(ModelKind::RandomForest, &names(3), &rows, &labels, &Hyperparams::default(), 9).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn ensemble_is_the_exact_member_mean() {
        let (rows, labels) = toy(40, 3);
        let m = train(ModelKind::AvgprobEnsemble, &names(3), &rows, &labels, &fast_params(), 1).unwrap();
        for r in &rows {
            let members = m.member_probabilities(r);
            assert_eq!(members.len(), 4);
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            assert_eq!(m.predict_proba(r).unwrap()[1], mean);
        }
    }

    #[test]
    fn two_member_average() {
        // Single-leaf trees whose leaf is the mean of 0/1 targets.
        let constant = |y: [f64; 5]| {
            let x = vec![vec![1.0]; 5];
            let t = Tree::fit(&x, &y, &[1.0; 5], (0..5).collect(), &TreeParams {
                max_depth: None,
                min_samples_leaf: 1,
                max_features: None,
            }, &mut ChaCha8Rng::seed_from_u64(0));
            Model::RandomForest(RandomForest::from_trees(vec![t]))
        };
        let low = constant([1.0, 0.0, 0.0, 0.0, 0.0]);
        let high = constant([1.0, 1.0, 1.0, 1.0, 0.0]);
        assert_eq!((low.predict(&[1.0]), high.predict(&[1.0])), (0.2, 0.8));
        assert_eq!(Model::AvgProb(vec![low, high]).predict(&[1.0]), 0.5);
    }

    #[test]
    fn training_errors() {
        let (rows, _) = toy(6, 4);
        assert!(matches!(
            train(ModelKind::NaiveBayes, &names(3), &rows, &[Suitable; 6], &Hyperparams::default(), 0),
            Err(LearnerError::SingleClass)
        ));
        let mut bad = rows.clone();
        bad[2][1] = f64::NAN;
        let labels = [Suitable, Disturbing, Suitable, Disturbing, Suitable, Disturbing];
        assert!(matches!(
            train(ModelKind::RandomForest, &names(3), &bad, &labels, &Hyperparams::default(), 0),
            Err(LearnerError::NonFinite { row: 2, col: 1 })
        ));
    }

    #[test]
    fn save_load_round_trip_predicts_identically() {
        let (rows, labels) = toy(60, 5);
        let m = train(ModelKind::RandomForest, &names(3), &rows, &labels, &Hyperparams::default(), 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save(&path).unwrap();
        let back = TrainedModel::load(&path).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let r: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..4.0)).collect();
            assert_eq!(back.predict_proba(&r).unwrap(), m.predict_proba(&r).unwrap());
        }
    }

    #[test]
    fn truncated_and_future_files_fail_to_load() {
        let (rows, labels) = toy(20, 6);
        let m = train(ModelKind::LogisticRegression, &names(3), &rows, &labels, &Hyperparams::default(), 0).unwrap();
        let text = m.to_json();
        assert!(matches!(
            TrainedModel::from_json(&text[..text.len() / 2]),
            Err(LearnerError::Json(_))
        ));
        let newer = text.replacen("\"format_version\":1", "\"format_version\":2", 1);
        assert!(matches!(
            TrainedModel::from_json(&newer),
            Err(LearnerError::Version { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn kind_names_parse() {
        for k in ModelKind::ALL {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
        }
        assert_eq!("rf".parse::<ModelKind>().unwrap(), ModelKind::RandomForest);
        assert!("svm".parse::<ModelKind>().is_err());
    }
}
