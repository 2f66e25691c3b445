//! Statistical screening: two-sample Kolmogorov-Smirnov tests, ECDF tables
//! for plotting, and information-gain attribute ranking.

mod infogain;
mod ks;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::folds::FoldError;

pub use infogain::{
    entropy, info_gain, info_gain_rank, info_gain_with_cuts, mdl_cut_points, RankedAttribute,
};
pub use ks::{
    kolmogorov_q, ks_asymptotic_p, ks_exact_p, ks_statistic, ks_two_sample, KsMethod, KsResult,
    EXACT_LIMIT,
};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Folds(#[from] FoldError),
}

/// One row of a two-class ECDF table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcdfPoint {
    pub x: f64,
    pub suitable: f64,
    pub disturbing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfReport {
    pub feature: String,
    pub mean_suitable: f64,
    pub mean_disturbing: f64,
    pub points: Vec<EcdfPoint>,
}

fn ecdf_at(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64
}

/// Both classes' ECDFs evaluated at every distinct observed value.
pub fn ecdf_report(
    feature: &str,
    suitable: &[f64],
    disturbing: &[f64],
) -> Result<EcdfReport, StatsError> {
    let prep = |s: &[f64]| -> Result<Vec<f64>, StatsError> {
        if s.is_empty() {
            return Err(StatsError::EmptySample);
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        let mut v = s.to_vec();
        v.sort_by(f64::total_cmp);
        Ok(v)
    };
    let (s, d) = (prep(suitable)?, prep(disturbing)?);
    let mut xs: Vec<f64> = s.iter().chain(&d).copied().collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(EcdfReport {
        feature: feature.to_string(),
        mean_suitable: mean(&s),
        mean_disturbing: mean(&d),
        points: xs
            .into_iter()
            .map(|x| EcdfPoint {
                x,
                suitable: ecdf_at(&s, x),
                disturbing: ecdf_at(&d, x),
            })
            .collect(),
    })
}
