use std::sync::OnceLock;

use audit_core::corpus::{
    propagate_labels, read_jsonl, write_jsonl, ChannelClass, ChannelRecord, Corpus, StatusReport,
    VideoLabel, VideoRecord,
};
use audit_core::folds::{complement, stratified_folds};
use audit_core::learners::{auc_rank, auc_trapezoid, train, Hyperparams, ModelKind, TrainedModel};
use audit_core::stats::{entropy, info_gain, ks_statistic, ks_two_sample};
use audit_core::synth::{generate, SynthConfig};
use audit_core::textlytics::{emoji_stats, EmojiRanking};
use chrono::NaiveDate;
use proptest::prelude::*;

fn class_of(b: bool) -> ChannelClass {
    if b {
        ChannelClass::Disturbing
    } else {
        ChannelClass::Suitable
    }
}

/// Small integers as floats, so ties are common.
fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-30i32..30).prop_map(f64::from), 1..40)
}

fn ecdf(s: &[f64], x: f64) -> f64 {
    s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64
}

fn brute_d(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .chain(b)
        .map(|&x| (ecdf(a, x) - ecdf(b, x)).abs())
        .fold(0.0, f64::max)
}

fn two_classes(min_each: usize) -> impl Strategy<Value = Vec<ChannelClass>> {
    prop::collection::vec(any::<bool>(), 0..120).prop_map(move |mut bits| {
        bits.extend(std::iter::repeat_n(false, min_each));
        bits.extend(std::iter::repeat_n(true, min_each));
        bits.into_iter().map(class_of).collect()
    })
}

proptest! {
    #[test]
    fn ks_statistic_matches_ecdf_sweep(a in sample(), b in sample()) {
        let d = ks_statistic(&a, &b).unwrap();
        prop_assert!((d - brute_d(&a, &b)).abs() <= 1e-12);
    }

    #[test]
    fn ks_is_symmetric_and_bounded(a in sample(), b in sample()) {
        let ab = ks_two_sample(&a, &b).unwrap();
        let ba = ks_two_sample(&b, &a).unwrap();
        prop_assert_eq!(ab.d_statistic, ba.d_statistic);
        prop_assert_eq!(ab.p_value, ba.p_value);
        prop_assert!((0.0..=1.0).contains(&ab.d_statistic));
        prop_assert!(ab.p_value > 0.0 && ab.p_value <= 1.0);
    }

    #[test]
    fn ks_d_ignores_monotone_transforms(a in sample(), b in sample()) {
        let f = |v: &Vec<f64>| v.iter().map(|x| x * x * x + 2.0 * x - 7.0).collect::<Vec<_>>();
        let g = |v: &Vec<f64>| v.iter().map(|x| (x / 10.0).exp()).collect::<Vec<_>>();
        let d = ks_statistic(&a, &b).unwrap();
        prop_assert_eq!(d, ks_statistic(&f(&a), &f(&b)).unwrap());
        prop_assert_eq!(d, ks_statistic(&g(&a), &g(&b)).unwrap());
    }

    #[test]
    fn info_gain_is_bounded_by_class_entropy(
        rows in prop::collection::vec(((-20i32..20), any::<bool>()), 2..150)
    ) {
        let values: Vec<f64> = rows.iter().map(|r| f64::from(r.0)).collect();
        let labels: Vec<ChannelClass> = rows.iter().map(|r| class_of(r.1)).collect();
        let d = labels.iter().filter(|&&c| c == ChannelClass::Disturbing).count();
        let h = entropy(&[labels.len() - d, d]);
        let ig = info_gain(&values, &labels);
        prop_assert!(ig >= -1e-12, "{}", ig);
        prop_assert!(ig <= h + 1e-12, "{} > {}", ig, h);
    }

    #[test]
    fn folds_partition_and_stratify(labels in two_classes(10), k in 2usize..11, seed in any::<u64>()) {
        let folds = stratified_folds(&labels, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut seen = vec![0u8; labels.len()];
        for f in &folds {
            for &i in f {
                seen[i] += 1;
            }
            let mut c = complement(labels.len(), f);
            c.extend(f);
            c.sort_unstable();
            prop_assert_eq!(c, (0..labels.len()).collect::<Vec<_>>());
        }
        prop_assert!(seen.iter().all(|&n| n == 1));
        for class in ChannelClass::ALL {
            let total = labels.iter().filter(|&&c| c == class).count() as f64;
            for f in &folds {
                let here = f.iter().filter(|&&i| labels[i] == class).count() as f64;
                prop_assert!((here - total / k as f64).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn rank_auc_equals_trapezoid(
        labels in two_classes(1),
        raw in prop::collection::vec(0u8..20, 250)
    ) {
        let scores: Vec<f64> = labels.iter().zip(&raw).map(|(_, &s)| f64::from(s) / 19.0).collect();
        let r = auc_rank(&scores, &labels).unwrap();
        let t = auc_trapezoid(&scores, &labels).unwrap();
        prop_assert!((r - t).abs() <= 1e-9, "{} vs {}", r, t);
    }
}

/// Emojis both in and out of the bundled table.
const EMOJIS: [&str; 12] = ["❤", "😂", "😭", "👍", "🙂", "😡", "🎉", "💀", "🔥", "🤖", "🧌", "🫠"];
const FILLER: [&str; 6] = ["hello", " ", "wow!!", "ünïcode", "\n", "12"];

fn text_pieces() -> impl Strategy<Value = Vec<(bool, usize)>> {
    prop::collection::vec((any::<bool>(), 0usize..12), 0..30)
}

fn render(pieces: &[(bool, usize)], with_filler: bool) -> String {
    let mut out = String::new();
    for &(emoji, i) in pieces {
        if emoji {
            out.push_str(EMOJIS[i]);
        } else if with_filler {
            out.push_str(FILLER[i % FILLER.len()]);
        }
        if with_filler {
            out.push(' ');
        }
    }
    out
}

proptest! {
    #[test]
    fn emoji_mean_lies_within_present_scores(pieces in text_pieces()) {
        let ranking = EmojiRanking::bundled();
        let stats = emoji_stats(&render(&pieces, true), ranking);
        let scores: Vec<f64> = stats.counts.keys().filter_map(|e| ranking.score(e)).collect();
        match stats.mean_score {
            None => prop_assert!(scores.is_empty()),
            Some(m) => {
                let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(m >= lo - 1e-12 && m <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn emoji_counts_ignore_interleaved_text(pieces in text_pieces()) {
        let ranking = EmojiRanking::bundled();
        let bare = emoji_stats(&render(&pieces, false), ranking);
        let mixed = emoji_stats(&render(&pieces, true), ranking);
        prop_assert_eq!(bare, mixed);
    }
}

fn label_from(i: u8) -> VideoLabel {
    match i % 4 {
        0 => VideoLabel::Suitable,
        1 => VideoLabel::Disturbing,
        2 => VideoLabel::Restricted,
        _ => VideoLabel::Irrelevant,
    }
}

fn corpus_of(per_channel: &[Vec<u8>], order: &[usize]) -> Corpus {
    let day = NaiveDate::from_ymd_opt(2015, 3, 1).unwrap();
    let channels = (0..per_channel.len())
        .map(|c| ChannelRecord::skeleton(format!("UC{c:03}"), day))
        .collect();
    let videos: Vec<VideoRecord> = per_channel
        .iter()
        .enumerate()
        .flat_map(|(c, labels)| {
            labels.iter().enumerate().map(move |(v, &l)| VideoRecord {
                video_id: format!("v{c}_{v}"),
                channel_id: format!("UC{c:03}"),
                label: label_from(l),
                made_for_kids: None,
                status: StatusReport::available(),
                content_score: None,
            })
        })
        .collect();
    let permuted = order.iter().map(|&i| videos[i].clone()).collect();
    Corpus::new(channels, permuted).unwrap()
}

proptest! {
    #[test]
    fn label_propagation_laws(
        per_channel in prop::collection::vec(prop::collection::vec(0u8..4, 0..8), 1..20),
        seed in any::<u64>()
    ) {
        let n: usize = per_channel.iter().map(Vec::len).sum();
        let mut order: Vec<usize> = (0..n).collect();
        // A seeded rotation-and-reverse keeps the permutation a bijection.
        if n > 0 {
            order.rotate_left((seed as usize) % n);
            if seed % 2 == 0 {
                order.reverse();
            }
        }
        let a = propagate_labels(&corpus_of(&per_channel, &(0..n).collect::<Vec<_>>()));
        let b = propagate_labels(&corpus_of(&per_channel, &order));
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a, &propagate_labels(&corpus_of(&per_channel, &(0..n).collect::<Vec<_>>())));

        let with_labeled = per_channel
            .iter()
            .filter(|ls| ls.iter().any(|&l| label_from(l).class().is_some()))
            .count();
        prop_assert_eq!(
            a.count(ChannelClass::Suitable) + a.count(ChannelClass::Disturbing),
            with_labeled
        );
        for l in a.labels.values() {
            prop_assert!((0.0..=1.0).contains(&l.disturbing_ratio));
            prop_assert_eq!(l.disturbing_ratio == 0.0, l.value == ChannelClass::Suitable);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn jsonl_round_trip_is_exact(seed in any::<u64>(), channels in 5usize..40) {
        let corpus = generate(&SynthConfig { channels, seed, ..Default::default() });
        let mut buf = Vec::new();
        write_jsonl(&corpus, &mut buf).unwrap();
        prop_assert_eq!(read_jsonl(buf.as_slice()).unwrap(), corpus);
    }
}

fn ensemble() -> &'static TrainedModel {
    static MODEL: OnceLock<TrainedModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let x: Vec<Vec<f64>> = (0..80)
            .map(|i| vec![f64::from(i % 9), f64::from(i % 7) - 3.0])
            .collect();
        let y: Vec<ChannelClass> = x.iter().map(|r| class_of(r[0] + r[1] > 4.0)).collect();
        let names = vec!["a".to_string(), "b".to_string()];
        train(ModelKind::AvgprobEnsemble, &names, &x, &y, &Hyperparams::default(), 7).unwrap()
    })
}

proptest! {
    #[test]
    fn ensemble_probability_is_member_mean(a in -20.0f64..20.0, b in -20.0f64..20.0) {
        let m = ensemble();
        let members = m.member_probabilities(&[a, b]);
        prop_assert!(members.len() >= 2);
        let mean = members.iter().sum::<f64>() / members.len() as f64;
        let p = m.predict_proba(&[a, b]).unwrap();
        prop_assert_eq!(p[1], mean.clamp(0.0, 1.0));
        prop_assert_eq!(p[0] + p[1], 1.0);
    }
}
