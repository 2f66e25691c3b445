//! Core pipeline for flagging channels likely to post disturbing
//! kid-targeted videos: corpus model, text analytics, feature extraction,
//! statistical screening, classifiers, and a synthetic corpus generator.

pub mod corpus;
pub mod features;
pub mod folds;
pub mod learners;
pub mod stats;
pub mod synth;
pub mod textlytics;
