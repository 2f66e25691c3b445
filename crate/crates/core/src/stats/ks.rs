use serde::{Deserialize, Serialize};

use super::StatsError;

/// Largest `n1 * n2` for which the p-value is computed by lattice-path
/// enumeration instead of the asymptotic series.
pub const EXACT_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KsMethod {
    Asymptotic,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d_statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
    pub method: KsMethod,
}

fn sorted_finite(sample: &[f64]) -> Result<Vec<f64>, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `sup |F_a(x) - F_b(x)|` over all x, by a merge sweep over both sorted
/// samples. Tied values advance both ECDFs before the gap is measured.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let a = sorted_finite(a)?;
    let b = sorted_finite(b)?;
    Ok(sweep(&a, &b))
}

fn sweep(a: &[f64], b: &[f64]) -> f64 {
    let (n1, n2) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let x = a[i].min(b[j]);
        while i < n1 && a[i] <= x {
            i += 1;
        }
        while j < n2 && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    // Once one sample is exhausted its ECDF is 1 and the other only rises.
    d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs())
}

/// Two-sample Kolmogorov-Smirnov test.
///
/// The p-value is exact (lattice-path enumeration) when `n1 * n2 <=
/// EXACT_LIMIT` and uses the corrected asymptotic series otherwise.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, StatsError> {
    let sa = sorted_finite(a)?;
    let sb = sorted_finite(b)?;
    let (n1, n2) = (sa.len(), sb.len());
    let d = sweep(&sa, &sb);
    let (p_value, method) = if n1.saturating_mul(n2) <= EXACT_LIMIT {
        (ks_exact_p(d, n1, n2), KsMethod::Exact)
    } else {
        (ks_asymptotic_p(d, n1, n2), KsMethod::Asymptotic)
    };
    Ok(KsResult {
        d_statistic: d,
        p_value,
        n1,
        n2,
        method,
    })
}

/// Survival function of the Kolmogorov distribution,
/// `Q(t) = 2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 t^2)`.
pub fn kolmogorov_q(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 1.18 {
        // The alternating series converges slowly here; use the Jacobi
        // theta form of the CDF instead.
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * t * t)).exp();
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / t
            * (y + y.powi(9) + y.powi(25) + y.powi(49));
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * t * t).exp();
        sum += sign * term;
        if term < 1e-300 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic two-sided p-value with Stephens' small-sample correction of
/// the effective sample size `ne = n1 n2 / (n1 + n2)`.
pub fn ks_asymptotic_p(d: f64, n1: usize, n2: usize) -> f64 {
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let s = ne.sqrt();
    let lambda = (s + 0.12 + 0.11 / s) * d;
    kolmogorov_q(lambda).max(f64::MIN_POSITIVE)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64)
}

/// Exact `P(D >= d)` under the null, assuming no ties.
///
/// Counts monotone lattice paths from (0,0) to (n1,n2) that touch a point
/// with `|i/n1 - j/n2| >= d`, by summing, over each first such point, the
/// paths that reach it while staying inside times the paths from it to the
/// corner.
pub fn ks_exact_p(d: f64, n1: usize, n2: usize) -> f64 {
    if d <= 0.0 {
        return 1.0;
    }
    // Fix the summation order so swapping the samples gives identical bits.
    let (n1, n2) = (n1.min(n2), n1.max(n2));
    // D is a multiple of 1/(n1 n2); work in those integer units.
    let scale = (n1 * n2) as f64;
    let bound = (d * scale - 1e-7).ceil() as i64;
    let outside = |i: usize, j: usize| (i as i64 * n2 as i64 - j as i64 * n1 as i64).abs() >= bound;
    let total = binomial(n1 + n2, n1);
    let mut hit = 0.0;
    let mut prev = vec![0.0f64; n2 + 1];
    let mut cur = vec![0.0f64; n2 + 1];
    for i in 0..=n1 {
        for j in 0..=n2 {
            let reach = if i == 0 && j == 0 {
                1.0
            } else {
                let up = if i > 0 { prev[j] } else { 0.0 };
                let left = if j > 0 { cur[j - 1] } else { 0.0 };
                up + left
            };
            if outside(i, j) {
                hit += reach * binomial(n1 - i + n2 - j, n1 - i);
                cur[j] = 0.0;
            } else {
                cur[j] = reach;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    (hit / total).clamp(f64::MIN_POSITIVE, 1.0)
}
