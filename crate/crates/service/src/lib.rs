//! Review-queue service: ranks channels with the serving model, records
//! moderator decisions and retrains on them.

mod api;
mod config;
mod state;
mod store;

use thiserror::Error;

pub use api::{
    router, serve, ChannelDetail, FeatureValue, ModelStatus, QueueEntry, QueuePage, Scoring,
    StatusSummary, Subscribers,
};
pub use config::Config;
pub use state::{
    AppState, DefaultTrainer, JobInfo, JobState, Serving, ServingInfo, TrainRequest, Trained,
    Trainer,
};
pub use store::{Decision, DecisionStore, ReviewDecision, WriteOutcome};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("config: {0}")]
    Config(String),
    #[error("decision store: {0}")]
    Store(String),
    #[error(transparent)]
    Corpus(#[from] audit_core::corpus::CorpusError),
    #[error(transparent)]
    Model(#[from] audit_core::learners::LearnerError),
    #[error("text analytics: {0}")]
    Text(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}
