use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::corpus::ChannelClass;
use crate::folds::{complement, stratified_folds};

/// Shannon entropy in bits of a class-count vector.
pub fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.log2()
        })
        .sum()
}

fn class_counts(labels: &[ChannelClass]) -> [usize; 2] {
    let mut c = [0; 2];
    for l in labels {
        c[l.index()] += 1;
    }
    c
}

/// Supervised discretization with the Fayyad-Irani entropy/MDL stopping
/// rule. Returns sorted cut points; a value `v` falls in bin
/// `cuts.partition_point(|&c| c < v)`, i.e. cuts are upper-inclusive.
pub fn mdl_cut_points(values: &[f64], labels: &[ChannelClass]) -> Vec<f64> {
    let mut pairs: Vec<(f64, usize)> = values
        .iter()
        .zip(labels)
        .map(|(&v, l)| (v, l.index()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cuts = Vec::new();
    split(&pairs, &mut cuts);
    cuts.sort_by(f64::total_cmp);
    cuts
}

fn counts_of(pairs: &[(f64, usize)]) -> [usize; 2] {
    let mut c = [0; 2];
    for &(_, y) in pairs {
        c[y] += 1;
    }
    c
}

fn distinct_classes(c: &[usize; 2]) -> f64 {
    c.iter().filter(|&&n| n > 0).count() as f64
}

fn split(pairs: &[(f64, usize)], cuts: &mut Vec<f64>) {
    let n = pairs.len();
    if n < 2 {
        return;
    }
    let total = counts_of(pairs);
    let ent = entropy(&total);
    if ent == 0.0 {
        return;
    }
    // Best boundary between distinct values by weighted child entropy.
    let mut left = [0usize; 2];
    let mut best: Option<(f64, usize)> = None;
    for i in 0..n - 1 {
        left[pairs[i].1] += 1;
        if pairs[i].0 == pairs[i + 1].0 {
            continue;
        }
        let right = [total[0] - left[0], total[1] - left[1]];
        let k = (i + 1) as f64;
        let e = (k * entropy(&left) + (n as f64 - k) * entropy(&right)) / n as f64;
        if best.is_none_or(|(b, _)| e < b) {
            best = Some((e, i + 1));
        }
    }
    let Some((child_ent, at)) = best else {
        return;
    };
    let (lo, hi) = pairs.split_at(at);
    let (cl, ch) = (counts_of(lo), counts_of(hi));
    let gain = ent - child_ent;
    let k = distinct_classes(&total);
    let delta = (3f64.powf(k) - 2.0).log2()
        - (k * ent - distinct_classes(&cl) * entropy(&cl) - distinct_classes(&ch) * entropy(&ch));
    let threshold = (((n - 1) as f64).log2() + delta) / n as f64;
    if gain <= threshold {
        return;
    }
    cuts.push((lo[lo.len() - 1].0 + hi[0].0) / 2.0);
    split(lo, cuts);
    split(hi, cuts);
}

/// `H(class) - H(class | bin)` with bins given by `cuts`.
pub fn info_gain_with_cuts(values: &[f64], labels: &[ChannelClass], cuts: &[f64]) -> f64 {
    let mut bins = vec![[0usize; 2]; cuts.len() + 1];
    for (&v, l) in values.iter().zip(labels) {
        bins[cuts.partition_point(|&c| c < v)][l.index()] += 1;
    }
    let n = values.len() as f64;
    let cond: f64 = bins
        .iter()
        .map(|b| (b[0] + b[1]) as f64 / n * entropy(b))
        .sum();
    (entropy(&class_counts(labels)) - cond).max(0.0)
}

/// Information gain of one feature after MDL discretization on the same
/// data.
pub fn info_gain(values: &[f64], labels: &[ChannelClass]) -> f64 {
    let cuts = mdl_cut_points(values, labels);
    info_gain_with_cuts(values, labels, &cuts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAttribute {
    pub name: String,
    pub mean_info_gain: f64,
    pub fold_scores: Vec<f64>,
}

/// Rank columns of `rows` by information gain averaged over stratified
/// folds. In each fold, bins and gain are computed on the fold's training
/// portion.
pub fn info_gain_rank(
    rows: &[Vec<f64>],
    names: &[String],
    labels: &[ChannelClass],
    folds: usize,
    seed: u64,
) -> Result<Vec<RankedAttribute>, StatsError> {
    if rows.len() != labels.len() {
        return Err(StatsError::Shape(format!(
            "{} rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    if rows.iter().any(|r| r.len() != names.len()) {
        return Err(StatsError::Shape("row width differs from names".into()));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let counts = class_counts(labels);
    if counts.contains(&0) {
        return Err(StatsError::SingleClass);
    }
    let partition = stratified_folds(labels, folds, seed)?;
    let n = labels.len();
    let per_fold: Vec<Vec<f64>> = partition
        .par_iter()
        .map(|test| {
            let train = complement(n, test);
            let y: Vec<ChannelClass> = train.iter().map(|&i| labels[i]).collect();
            (0..names.len())
                .map(|f| {
                    let x: Vec<f64> = train.iter().map(|&i| rows[i][f]).collect();
                    info_gain(&x, &y)
                })
                .collect()
        })
        .collect();
    let mut ranked: Vec<RankedAttribute> = names
        .iter()
        .enumerate()
        .map(|(f, name)| {
            let fold_scores: Vec<f64> = per_fold.iter().map(|s| s[f]).collect();
            RankedAttribute {
                name: name.clone(),
                mean_info_gain: fold_scores.iter().sum::<f64>() / fold_scores.len() as f64,
                fold_scores,
            }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.mean_info_gain
            .total_cmp(&a.mean_info_gain)
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ChannelClass::*;

    #[test]
    fn entropy_of_balanced_binary_is_one_bit() {
        assert_eq!(entropy(&[5, 5]), 1.0);
        assert_eq!(entropy(&[7, 0]), 0.0);
        assert_eq!(entropy(&[]), 0.0);
    }

    #[test]
    fn class_prior_entropy_from_dataset_counts() {
        // Direct formula for a 779:559 split.
        let p: f64 = 779.0 / 1338.0;
        let q: f64 = 559.0 / 1338.0;
        let want = -(p * p.log2() + q * q.log2());
        assert!((entropy(&[779, 559]) - want).abs() < 1e-15);
        assert!((want - 0.9804).abs() < 5e-5);
    }

    #[test]
    fn perfect_binary_predictor_gains_one_bit() {
        let y = [Suitable, Suitable, Disturbing, Disturbing];
        let x = [0.0, 0.0, 1.0, 1.0];
        assert!((info_gain(&x, &y) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_feature_gains_nothing() {
        let y = [Suitable, Disturbing, Suitable, Disturbing, Disturbing];
        assert_eq!(info_gain(&[3.0; 5], &y), 0.0);
        assert!(mdl_cut_points(&[3.0; 5], &y).is_empty());
    }

    #[test]
    fn mdl_rejects_noise_but_keeps_clear_boundaries() {
        // Alternating labels along x carry no usable split.
        let x: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let y: Vec<_> = (0..40).map(|i| if i % 2 == 0 { Suitable } else { Disturbing }).collect();
        assert!(mdl_cut_points(&x, &y).is_empty());

        let y: Vec<_> = (0..40).map(|i| if i < 25 { Suitable } else { Disturbing }).collect();
        assert_eq!(mdl_cut_points(&x, &y), vec![24.5]);
    }

    #[test]
    fn ranking_orders_by_mean_gain() {
        let n = 60;
        let labels: Vec<_> = (0..n).map(|i| if i % 3 == 0 { Disturbing } else { Suitable }).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let y = labels[i].index() as f64;
                vec![1.0, y * 10.0, (i % 7) as f64]
            })
            .collect();
        let names = vec!["const".to_string(), "signal".to_string(), "noise".to_string()];
        let ranked = info_gain_rank(&rows, &names, &labels, 10, 7).unwrap();
        assert_eq!(ranked[0].name, "signal");
        assert_eq!(ranked[0].fold_scores.len(), 10);
        let h = entropy(&[40, 20]);
        for r in &ranked {
            for &s in &r.fold_scores {
                assert!((0.0..=h + 1e-12).contains(&s));
            }
            let mean = r.fold_scores.iter().sum::<f64>() / 10.0;
            assert!((mean - r.mean_info_gain).abs() < 1e-15);
        }
        let c = ranked.iter().find(|r| r.name == "const").unwrap();
        assert_eq!(c.mean_info_gain, 0.0);
        assert_eq!(ranked, info_gain_rank(&rows, &names, &labels, 10, 7).unwrap());
    }

    #[test]
    fn single_class_labels_are_rejected() {
        let rows = vec![vec![1.0]; 20];
        let err = info_gain_rank(&rows, &["a".into()], &[Suitable; 20], 10, 0).unwrap_err();
        assert_eq!(err, StatsError::SingleClass);
    }
}
