use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context, Result};
use audit_core::corpus::{disturbing_counts, read_count_file};
use audit_core::features::{
    labeled_inputs, prepare_inputs, sidecar_path, FeatureMatrix, FeaturePipeline, FeatureSpec,
};
use audit_core::learners::{
    evaluate_cv, evaluate_creation_time, evaluate_pipeline_cv, rank_channels, train as fit,
    EvalReport, Hyperparams, ModelKind, TrainedModel,
};
use audit_core::textlytics::TextAnalyzer;

use crate::data::{labels_for, open_corpus};
use crate::{EvalArgs, RankArgs};

fn load_params(path: Option<&Path>) -> Result<Hyperparams> {
    Ok(match path {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => Hyperparams::default(),
    })
}

fn load_labeled(matrix: &Path) -> Result<FeatureMatrix> {
    let m = FeatureMatrix::load(matrix).with_context(|| format!("loading {}", matrix.display()))?;
    let labeled = m.labeled();
    if labeled.len() < m.len() {
        log::info!("{} unlabeled rows ignored", m.len() - labeled.len());
    }
    Ok(labeled)
}

pub fn train(
    matrix: &Path,
    kind: ModelKind,
    params: Option<&Path>,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let m = load_labeled(matrix)?;
    let params = load_params(params)?;
    let mut model = fit(kind, &m.names, &m.rows, &m.classes()?, &params, seed)?;
    let sidecar = sidecar_path(matrix);
    if sidecar.exists() {
        model = model.with_pipeline(FeaturePipeline::load(&sidecar)?)?;
    } else {
        log::warn!(
            "{} not found; the model can score matrices but not corpora",
            sidecar.display()
        );
    }
    model.meta.trained_at = Some(chrono::Utc::now().to_rfc3339());
    model.save(out)?;
    println!(
        "{} trained on {} channels ({} suitable, {} disturbing), {} features",
        kind,
        model.meta.samples,
        model.meta.class_counts[0],
        model.meta.class_counts[1],
        model.feature_names.len()
    );
    Ok(())
}

fn print_report(r: &EvalReport) {
    println!(
        "{:<18} {:>7} {:>7} {:>9} {:>7} {:>7} {:>7}",
        "Method", "TPRate", "FPRate", "Precision", "Recall", "F1", "AUC"
    );
    let w = &r.weighted;
    println!(
        "{:<18} {:>7.3} {:>7.3} {:>9.3} {:>7.3} {:>7.3} {:>7.3}",
        r.kind.as_str(),
        w.tp_rate,
        w.fp_rate,
        w.precision,
        w.recall,
        w.f1,
        r.auc
    );
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let params = load_params(args.params.as_deref())?;
    let report = match (&args.matrix, &args.corpus) {
        (Some(matrix), _) => {
            let m = load_labeled(matrix)?;
            evaluate_cv(args.kind, &params, &m.names, &m.rows, &m.classes()?, args.folds, args.seed)?
        }
        (None, Some(corpus)) => {
            let corpus = open_corpus(corpus)?;
            let labels = labels_for(&corpus, None)?;
            let inputs = prepare_inputs(&corpus, &TextAnalyzer::bundled())?;
            let (inputs, classes) = labeled_inputs(inputs, &labels);
            let mut spec = match &args.spec {
                Some(p) => FeatureSpec::load(p)?,
                None => FeatureSpec::default(),
            };
            if args.creation_time {
                spec.creation_time_only = true;
                evaluate_creation_time(args.kind, &params, &spec, &inputs, &classes, args.folds, args.seed)?
            } else {
                evaluate_pipeline_cv(args.kind, &params, &spec, &inputs, &classes, args.folds, args.seed)?
            }
        }
        (None, None) => bail!("give --matrix or --corpus"),
    };
    print_report(&report);
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

pub fn rank(args: &RankArgs) -> Result<()> {
    let (Some(model), Some(corpus)) = (&args.model, &args.corpus) else {
        bail!("give --matrix, or --model with --corpus");
    };
    let model = TrainedModel::load(model).with_context(|| format!("loading {}", model.display()))?;
    let corpus = open_corpus(corpus)?;
    let counts = match &args.counts {
        Some(p) => read_count_file(File::open(p).with_context(|| format!("opening {}", p.display()))?)?,
        None => disturbing_counts(&labels_for(&corpus, None)?),
    };
    let inputs = prepare_inputs(&corpus, &TextAnalyzer::bundled())?;
    let ranked = rank_channels(&model, &inputs, args.severity, Some(&counts))?;
    for (i, r) in ranked.iter().take(20).enumerate() {
        let top = r.attributions.first().map(|a| a.group.as_str()).unwrap_or("-");
        println!("{:>4}  {:<28} {:>8.4}  {}", i + 1, r.channel_id, r.score, top);
    }
    let flagged = ranked.iter().filter(|r| !r.missing_fields.is_empty()).count();
    if flagged > 0 {
        println!("{flagged} channels scored with neutral encodings for missing fields");
    }
    std::fs::write(&args.out, serde_json::to_string_pretty(&ranked)?)?;
    Ok(())
}
