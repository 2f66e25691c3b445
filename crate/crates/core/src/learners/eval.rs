use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{auc_rank, ClassMetrics, Confusion};
use super::{check_training_set, train, Hyperparams, LearnerError, ModelKind};
use crate::corpus::ChannelClass;
use crate::features::{ChannelInputs, FeatureError, FeaturePipeline, FeatureSpec};
use crate::folds::{complement, stratified_folds};

/// A channel is predicted disturbing when P(disturbing) exceeds this.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub test_size: usize,
    pub accuracy: f64,
    pub auc: Option<f64>,
}

/// Metrics pooled over every out-of-fold prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: ModelKind,
    pub folds: usize,
    pub seed: u64,
    pub suitable: ClassMetrics,
    pub disturbing: ClassMetrics,
    pub weighted: ClassMetrics,
    pub auc: f64,
    pub confusion: Confusion,
    pub fold_breakdown: Vec<FoldSummary>,
    /// Out-of-fold P(disturbing), in input order.
    pub probabilities: Vec<f64>,
    /// Feature names used by the last fold's model.
    pub features: Vec<String>,
}

fn classify(p: f64) -> ChannelClass {
    if p > DECISION_THRESHOLD {
        ChannelClass::Disturbing
    } else {
        ChannelClass::Suitable
    }
}

impl EvalReport {
    fn build(
        kind: ModelKind,
        seed: u64,
        labels: &[ChannelClass],
        partition: &[Vec<usize>],
        probabilities: Vec<f64>,
        features: Vec<String>,
    ) -> Result<Self, LearnerError> {
        let predicted: Vec<ChannelClass> = probabilities.iter().map(|&p| classify(p)).collect();
        let confusion = Confusion::from_predictions(labels, &predicted);
        let auc = auc_rank(&probabilities, labels).ok_or(LearnerError::SingleClass)?;
        let fold_breakdown = partition
            .iter()
            .enumerate()
            .map(|(k, test)| {
                let truth: Vec<ChannelClass> = test.iter().map(|&i| labels[i]).collect();
                let probs: Vec<f64> = test.iter().map(|&i| probabilities[i]).collect();
                let correct = test.iter().filter(|&&i| predicted[i] == labels[i]).count();
                FoldSummary {
                    fold: k,
                    test_size: test.len(),
                    accuracy: correct as f64 / test.len() as f64,
                    auc: auc_rank(&probs, &truth),
                }
            })
            .collect();
        Ok(EvalReport {
            kind,
            folds: partition.len(),
            seed,
            suitable: confusion.class_metrics(ChannelClass::Suitable),
            disturbing: confusion.class_metrics(ChannelClass::Disturbing),
            weighted: confusion.weighted(),
            auc,
            confusion,
            fold_breakdown,
            probabilities,
            features,
        })
    }
}

/// Run `fit_predict(train_idx, test_idx)` on each stratified fold and pool
/// the out-of-fold probabilities.
fn cross_validate<F>(
    kind: ModelKind,
    labels: &[ChannelClass],
    folds: usize,
    seed: u64,
    fit_predict: F,
) -> Result<EvalReport, LearnerError>
where
    F: Fn(usize, &[usize], &[usize]) -> Result<(Vec<f64>, Vec<String>), LearnerError> + Sync,
{
    let partition = stratified_folds(labels, folds, seed)?;
    let n = labels.len();
    let results = partition
        .par_iter()
        .enumerate()
        .map(|(k, test)| fit_predict(k, &complement(n, test), test))
        .collect::<Result<Vec<_>, _>>()?;
    let mut probabilities = vec![f64::NAN; n];
    let mut features = Vec::new();
    for (test, (probs, names)) in partition.iter().zip(results) {
        for (&i, p) in test.iter().zip(probs) {
            probabilities[i] = p;
        }
        features = names;
    }
    EvalReport::build(kind, seed, labels, &partition, probabilities, features)
}

/// Stratified k-fold evaluation on a fixed matrix.
pub fn evaluate_cv(
    kind: ModelKind,
    params: &Hyperparams,
    names: &[String],
    rows: &[Vec<f64>],
    labels: &[ChannelClass],
    folds: usize,
    seed: u64,
) -> Result<EvalReport, LearnerError> {
    check_training_set(rows, labels, names.len())?;
    cross_validate(kind, labels, folds, seed, |k, train_idx, test_idx| {
        let x: Vec<Vec<f64>> = train_idx.iter().map(|&i| rows[i].clone()).collect();
        let y: Vec<ChannelClass> = train_idx.iter().map(|&i| labels[i]).collect();
        let m = train(kind, names, &x, &y, params, seed.wrapping_add(k as u64))?;
        let probs = test_idx.iter().map(|&i| m.prob_unchecked(&rows[i])).collect();
        Ok((probs, names.to_vec()))
    })
}

/// Stratified k-fold evaluation that refits the feature pipeline
/// (vocabularies and variance filter) on each training portion.
pub fn evaluate_pipeline_cv(
    kind: ModelKind,
    params: &Hyperparams,
    spec: &FeatureSpec,
    inputs: &[ChannelInputs],
    labels: &[ChannelClass],
    folds: usize,
    seed: u64,
) -> Result<EvalReport, LearnerError> {
    if inputs.len() != labels.len() {
        return Err(LearnerError::Shape(format!(
            "{} channels but {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    spec.validate()?;
    cross_validate(kind, labels, folds, seed, |k, train_idx, test_idx| {
        let train_inputs: Vec<ChannelInputs> =
            train_idx.iter().map(|&i| inputs[i].clone()).collect();
        let pipeline = FeaturePipeline::fit(spec.clone(), &train_inputs)?;
        let x: Vec<Vec<f64>> = train_inputs.iter().map(|c| pipeline.transform(c)).collect();
        let y: Vec<ChannelClass> = train_idx.iter().map(|&i| labels[i]).collect();
        let m = train(kind, &pipeline.names, &x, &y, params, seed.wrapping_add(k as u64))?;
        let probs = test_idx
            .iter()
            .map(|&i| m.prob_unchecked(&pipeline.transform(&inputs[i])))
            .collect();
        Ok((probs, pipeline.names.clone()))
    })
}

/// The pipeline protocol restricted to creation-time features.
pub fn evaluate_creation_time(
    kind: ModelKind,
    params: &Hyperparams,
    spec: &FeatureSpec,
    inputs: &[ChannelInputs],
    labels: &[ChannelClass],
    folds: usize,
    seed: u64,
) -> Result<EvalReport, LearnerError> {
    if !spec.creation_time_only {
        return Err(LearnerError::Features(FeatureError::Format(
            "creation-time evaluation needs a spec with creation_time_only set".into(),
        )));
    }
    evaluate_pipeline_cv(kind, params, spec, inputs, labels, folds, seed)
}
