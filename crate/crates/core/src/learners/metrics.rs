use serde::{Deserialize, Serialize};

use crate::corpus::ChannelClass;

/// Binary confusion counts with "disturbing" as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_predictions(truth: &[ChannelClass], predicted: &[ChannelClass]) -> Self {
        let mut c = Confusion::default();
        for (t, p) in truth.iter().zip(predicted) {
            match (t, p) {
                (ChannelClass::Disturbing, ChannelClass::Disturbing) => c.tp += 1,
                (ChannelClass::Disturbing, ChannelClass::Suitable) => c.fn_ += 1,
                (ChannelClass::Suitable, ChannelClass::Disturbing) => c.fp += 1,
                (ChannelClass::Suitable, ChannelClass::Suitable) => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.fp + self.tn
    }

    /// Counts as seen with `class` as the positive class: (tp, fn, fp, tn).
    fn as_positive(&self, class: ChannelClass) -> (usize, usize, usize, usize) {
        match class {
            ChannelClass::Disturbing => (self.tp, self.fn_, self.fp, self.tn),
            ChannelClass::Suitable => (self.tn, self.fp, self.fn_, self.tp),
        }
    }

    pub fn class_metrics(&self, class: ChannelClass) -> ClassMetrics {
        let (tp, fn_, fp, tn) = self.as_positive(class);
        let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let recall = div(tp, tp + fn_);
        let precision = div(tp, tp + fp);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics {
            tp_rate: recall,
            fp_rate: div(fp, fp + tn),
            precision,
            recall,
            f1,
            support: tp + fn_,
        }
    }

    /// Support-weighted average of both classes' metrics.
    pub fn weighted(&self) -> ClassMetrics {
        let per = ChannelClass::ALL.map(|c| self.class_metrics(c));
        let n = self.total() as f64;
        let avg = |f: fn(&ClassMetrics) -> f64| {
            if n == 0.0 {
                0.0
            } else {
                per.iter().map(|m| m.support as f64 * f(m)).sum::<f64>() / n
            }
        };
        ClassMetrics {
            tp_rate: avg(|m| m.tp_rate),
            fp_rate: avg(|m| m.fp_rate),
            precision: avg(|m| m.precision),
            recall: avg(|m| m.recall),
            f1: avg(|m| m.f1),
            support: self.total(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub tp_rate: f64,
    pub fp_rate: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// AUC as the Mann-Whitney statistic with mid-ranks for ties. `None` when
/// either class is absent.
pub fn auc_rank(scores: &[f64], truth: &[ChannelClass]) -> Option<f64> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = mid;
        }
        i = j + 1;
    }
    let pos: Vec<usize> = (0..n).filter(|&k| truth[k] == ChannelClass::Disturbing).collect();
    let (n1, n0) = (pos.len() as f64, (n - pos.len()) as f64);
    if n1 == 0.0 || n0 == 0.0 {
        return None;
    }
    let r1: f64 = pos.iter().map(|&k| ranks[k]).sum();
    Some((r1 - n1 * (n1 + 1.0) / 2.0) / (n1 * n0))
}

/// ROC points from descending thresholds; tied scores move diagonally.
pub fn roc_curve(scores: &[f64], truth: &[ChannelClass]) -> Vec<(f64, f64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let p = truth.iter().filter(|&&t| t == ChannelClass::Disturbing).count() as f64;
    let q = truth.len() as f64 - p;
    let mut pts = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            match truth[order[i]] {
                ChannelClass::Disturbing => tp += 1.0,
                ChannelClass::Suitable => fp += 1.0,
            }
            i += 1;
        }
        pts.push((fp / q, tp / p));
    }
    pts
}

/// AUC by trapezoidal integration of the ROC curve.
pub fn auc_trapezoid(scores: &[f64], truth: &[ChannelClass]) -> Option<f64> {
    let p = truth.iter().filter(|&&t| t == ChannelClass::Disturbing).count();
    if p == 0 || p == truth.len() {
        return None;
    }
    let pts = roc_curve(scores, truth);
    Some(
        pts.windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum(),
    )
}
