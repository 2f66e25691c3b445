use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use audit_core::corpus::{
    disturbing_counts, load_corpus, read_count_file, ChannelClass, Corpus, Format, LabelSet,
};
use audit_core::features::{labeled_inputs, prepare_inputs, ChannelInputs, FeaturePipeline, FeatureSpec};
use audit_core::learners::{
    evaluate_pipeline_cv, rank_channels, train, EvalReport, Hyperparams, ModelKind, RankedChannel,
    TrainedModel,
};
use audit_core::textlytics::TextAnalyzer;
use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::store::DecisionStore;
use crate::ServiceError;

const SERVING_FILE: &str = "serving.json";

/// Model plus the ranking it produced. Replaced as a whole on retrain, so a
/// reader holding one sees a consistent pair.
#[derive(Debug)]
pub struct Serving {
    pub version: u64,
    pub model: TrainedModel,
    pub ranking: Vec<RankedChannel>,
    pub position: HashMap<String, usize>,
}

impl Serving {
    fn new(version: u64, model: TrainedModel, ranking: Vec<RankedChannel>) -> Self {
        let position = ranking
            .iter()
            .enumerate()
            .map(|(i, r)| (r.channel_id.clone(), i))
            .collect();
        Serving {
            version,
            model,
            ranking,
            position,
        }
    }

    pub fn info(&self) -> ServingInfo {
        ServingInfo {
            version: self.version,
            kind: self.model.kind,
            features: self.model.feature_names.len(),
            creation_time_only: self
                .model
                .pipeline
                .as_ref()
                .is_some_and(|p| p.spec.creation_time_only),
            samples: self.model.meta.samples,
            class_counts: self.model.meta.class_counts,
            trained_at: self.model.meta.trained_at.clone(),
            ranked_channels: self.ranking.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServingInfo {
    pub version: u64,
    pub kind: ModelKind,
    pub features: usize,
    pub creation_time_only: bool,
    pub samples: usize,
    pub class_counts: [usize; 2],
    pub trained_at: Option<String>,
    pub ranked_channels: usize,
}

/// Bookkeeping that must survive restarts alongside the decisions.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
struct ServingState {
    version: u64,
    /// Logged decisions when the serving model was trained.
    decisions_at_training: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobInfo {
    pub id: u64,
    pub state: JobState,
    pub started_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    /// Model version the job produced.
    pub model_version: Option<u64>,
    pub error: Option<String>,
    /// Cross-validated evaluation of the retrained configuration, without
    /// the per-channel probabilities.
    pub report: Option<EvalReport>,
    /// Labeled channels the job trained on.
    pub samples: usize,
}

/// Everything a trainer needs.
pub struct TrainRequest<'a> {
    pub kind: ModelKind,
    pub params: &'a Hyperparams,
    pub spec: &'a FeatureSpec,
    pub inputs: &'a [ChannelInputs],
    pub labels: &'a [ChannelClass],
    pub folds: usize,
    pub seed: u64,
}

pub struct Trained {
    pub model: TrainedModel,
    pub report: EvalReport,
}

/// Fits the model a retrain job will serve.
pub trait Trainer: Send + Sync {
    fn train(&self, req: &TrainRequest<'_>) -> Result<Trained, String>;
}

/// Cross-validates the configuration, then fits the pipeline and model on
/// every labeled channel.
pub struct DefaultTrainer;

impl Trainer for DefaultTrainer {
    fn train(&self, req: &TrainRequest<'_>) -> Result<Trained, String> {
        let report = evaluate_pipeline_cv(
            req.kind, req.params, req.spec, req.inputs, req.labels, req.folds, req.seed,
        )
        .map_err(|e| e.to_string())?;
        let pipeline = FeaturePipeline::fit(req.spec.clone(), req.inputs).map_err(|e| e.to_string())?;
        let rows: Vec<Vec<f64>> = req.inputs.iter().map(|i| pipeline.transform(i)).collect();
        let mut model = train(req.kind, &pipeline.names, &rows, req.labels, req.params, req.seed)
            .and_then(|m| m.with_pipeline(pipeline))
            .map_err(|e| e.to_string())?;
        model.meta.trained_at = Some(Utc::now().to_rfc3339());
        Ok(Trained { model, report })
    }
}

pub(crate) enum RetrainRefusal {
    Running,
    TooFewDecisions { new: usize, needed: usize },
}

/// Shared service state. Reads go through `serving` snapshots; decision
/// writes go through the store's single lock.
pub struct AppState {
    pub config: Config,
    pub corpus: Corpus,
    pub inputs: Vec<ChannelInputs>,
    index: HashMap<String, usize>,
    pub base_labels: LabelSet,
    counts: BTreeMap<String, u32>,
    pub store: Mutex<DecisionStore>,
    serving: RwLock<Option<Arc<Serving>>>,
    serving_state: Mutex<ServingState>,
    jobs: Mutex<BTreeMap<u64, JobInfo>>,
    next_job: AtomicU64,
    retraining: AtomicBool,
    trainer: Box<dyn Trainer>,
}

fn corpus_format(path: &Path) -> Format {
    if path.is_dir() {
        Format::CsvBundle
    } else {
        Format::Jsonl
    }
}

fn read_counts(path: &Path) -> Result<BTreeMap<String, u32>, ServiceError> {
    let f = std::fs::File::open(path)
        .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
    read_count_file(f).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))
}

fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text)?;
    std::fs::File::open(&tmp)?.sync_all()?;
    std::fs::rename(&tmp, path)
}

impl AppState {
    /// Load corpus, model and decisions from the configured paths. A missing
    /// model file leaves the service without a ranking until a retrain.
    pub fn open(config: Config) -> Result<Arc<Self>, ServiceError> {
        let corpus = load_corpus(&config.corpus, corpus_format(&config.corpus))?;
        let model = if config.model.exists() {
            Some(TrainedModel::load(&config.model)?)
        } else {
            log::warn!("{} not found; serving no ranking until a retrain", config.model.display());
            None
        };
        Self::new(config, corpus, model, Box::new(DefaultTrainer))
    }

    pub fn new(
        config: Config,
        corpus: Corpus,
        model: Option<TrainedModel>,
        trainer: Box<dyn Trainer>,
    ) -> Result<Arc<Self>, ServiceError> {
        config.validate()?;
        let inputs = prepare_inputs(&corpus, &TextAnalyzer::bundled())
            .map_err(|e| ServiceError::Text(e.to_string()))?;
        let index = inputs
            .iter()
            .enumerate()
            .map(|(i, c)| (c.record.channel_id.clone(), i))
            .collect();
        let base_labels = audit_core::corpus::propagate_labels(&corpus);
        let counts = match &config.disturbing_counts {
            Some(path) => read_counts(path)?,
            None => disturbing_counts(&base_labels),
        };
        let store = DecisionStore::open(&config.store, config.snapshot_every)?;
        let state_path = config.store.join(SERVING_FILE);
        let mut serving_state: ServingState = match std::fs::read_to_string(&state_path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| ServiceError::Store(format!("{}: {e}", state_path.display())))?,
            Err(_) => ServingState::default(),
        };
        let state = AppState {
            config,
            corpus,
            inputs,
            index,
            base_labels,
            counts,
            store: Mutex::new(store),
            serving: RwLock::new(None),
            serving_state: Mutex::new(ServingState::default()),
            jobs: Mutex::new(BTreeMap::new()),
            next_job: AtomicU64::new(1),
            retraining: AtomicBool::new(false),
            trainer,
        };
        if let Some(model) = model {
            serving_state.version = serving_state.version.max(1);
            let ranking = state.rank(&model)?;
            *state.serving.write() = Some(Arc::new(Serving::new(serving_state.version, model, ranking)));
        }
        *state.serving_state.lock() = serving_state;
        Ok(Arc::new(state))
    }

    pub fn rank(&self, model: &TrainedModel) -> Result<Vec<RankedChannel>, ServiceError> {
        Ok(rank_channels(
            model,
            &self.inputs,
            self.config.severity,
            Some(&self.counts),
        )?)
    }

    pub fn channel(&self, id: &str) -> Option<&ChannelInputs> {
        self.index.get(id).map(|&i| &self.inputs[i])
    }

    /// The current model and ranking, if any.
    pub fn serving(&self) -> Option<Arc<Serving>> {
        self.serving.read().clone()
    }

    /// Corpus labels with confirmed decisions applied.
    pub fn effective_labels(&self) -> LabelSet {
        self.base_labels.with_overrides(&self.store.lock().confirmed_labels())
    }

    pub fn job(&self, id: u64) -> Option<JobInfo> {
        self.jobs.lock().get(&id).cloned()
    }

    /// Decisions logged since the serving model was trained.
    pub fn new_decisions(&self) -> usize {
        let logged = self.store.lock().logged();
        logged.saturating_sub(self.serving_state.lock().decisions_at_training)
    }

    /// Reserve the single retrain slot and register a job.
    pub(crate) fn begin_retrain(&self) -> Result<u64, RetrainRefusal> {
        let new = self.new_decisions();
        let needed = self.config.retrain_min_decisions;
        if new < needed {
            return Err(RetrainRefusal::TooFewDecisions { new, needed });
        }
        if self
            .retraining
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .is_err()
        {
            return Err(RetrainRefusal::Running);
        }
        let id = self.next_job.fetch_add(1, Ordering::Relaxed);
        self.jobs.lock().insert(
            id,
            JobInfo {
                id,
                state: JobState::Running,
                started_at: Utc::now(),
                finished_at: None,
                model_version: None,
                error: None,
                report: None,
                samples: 0,
            },
        );
        Ok(id)
    }

    /// Body of a retrain job; blocking. On success the model file is
    /// replaced and the serving pair swapped; on failure nothing changes.
    pub(crate) fn run_retrain(&self, job: u64) {
        let outcome = self.retrain_once();
        let mut jobs = self.jobs.lock();
        let info = jobs.get_mut(&job).expect("job registered");
        info.finished_at = Some(Utc::now());
        match outcome {
            Ok((version, samples, report)) => {
                info.state = JobState::Succeeded;
                info.model_version = Some(version);
                info.samples = samples;
                info.report = Some(report);
            }
            Err(e) => {
                log::error!("retrain job {job} failed: {e}");
                info.state = JobState::Failed;
                info.error = Some(e);
            }
        }
        drop(jobs);
        self.retraining.store(false, Ordering::Release);
    }

    /// Mark a job failed when its task died before reporting.
    pub(crate) fn abort_retrain(&self, job: u64, message: String) {
        if let Some(info) = self.jobs.lock().get_mut(&job) {
            if info.state == JobState::Running {
                info.state = JobState::Failed;
                info.finished_at = Some(Utc::now());
                info.error = Some(message);
            }
        }
        self.retraining.store(false, Ordering::Release);
    }

    fn retrain_once(&self) -> Result<(u64, usize, EvalReport), String> {
        let logged = self.store.lock().logged();
        let labels = self.effective_labels();
        let (inputs, classes) = labeled_inputs(self.inputs.clone(), &labels);
        let current = self.serving();
        let default_params = Hyperparams::default();
        let default_spec = FeatureSpec::default();
        let (kind, params, spec) = match &current {
            Some(s) => (
                s.model.kind,
                &s.model.params,
                s.model.pipeline.as_ref().map(|p| &p.spec).unwrap_or(&default_spec),
            ),
            None => (self.config.retrain_kind, &default_params, &default_spec),
        };
        let trained = self.trainer.train(&TrainRequest {
            kind,
            params,
            spec,
            inputs: &inputs,
            labels: &classes,
            folds: self.config.retrain_folds,
            seed: self.config.retrain_seed,
        })?;
        let ranking = self.rank(&trained.model).map_err(|e| e.to_string())?;
        let mut report = trained.report;
        report.probabilities.clear();

        let next = ServingState {
            version: self.serving_state.lock().version + 1,
            decisions_at_training: logged,
        };
        write_atomic(&self.config.model, &trained.model.to_json())
            .map_err(|e| format!("{}: {e}", self.config.model.display()))?;
        let state_path = self.config.store.join(SERVING_FILE);
        write_atomic(&state_path, &serde_json::to_string(&next).expect("state serializes"))
            .map_err(|e| format!("{}: {e}", state_path.display()))?;

        *self.serving.write() = Some(Arc::new(Serving::new(next.version, trained.model, ranking)));
        *self.serving_state.lock() = next;
        Ok((next.version, classes.len(), report))
    }
}
