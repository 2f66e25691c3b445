use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Column-wise z-scoring fitted on training rows. Constant columns keep a
/// unit scale so they map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let n = x.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for row in x {
            for j in 0..d {
                var[j] += (row[j] - mean[j]).powi(2) / n;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    /// Inverse regularization strength: the objective is
    /// `0.5 |w|^2 + c * sum(log-loss)`, intercept unpenalized.
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            c: 1.0,
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    scaler: Standardizer,
    weights: Vec<f64>,
    intercept: f64,
}

fn objective(z: &[Vec<f64>], y: &[f64], beta: &DVector<f64>, c: f64) -> f64 {
    let d = beta.len() - 1;
    let reg = 0.5 * beta.rows(0, d).norm_squared();
    let loss: f64 = z
        .iter()
        .zip(y)
        .map(|(row, &t)| {
            let m = row.iter().zip(beta.iter()).map(|(a, b)| a * b).sum::<f64>() + beta[d];
            softplus(m) - t * m
        })
        .sum();
    reg + c * loss
}

impl LogisticRegression {
    /// Newton's method with backtracking on the penalized log-likelihood.
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: &LogisticParams) -> Self {
        let scaler = Standardizer::fit(x);
        let z: Vec<Vec<f64>> = x.iter().map(|r| scaler.apply(r)).collect();
        let d = scaler.mean.len();
        let c = params.c;
        let mut beta = DVector::<f64>::zeros(d + 1);
        let mut obj = objective(&z, y, &beta, c);
        for _ in 0..params.max_iter {
            let mut grad = DVector::<f64>::zeros(d + 1);
            let mut hess = DMatrix::<f64>::zeros(d + 1, d + 1);
            for j in 0..d {
                grad[j] = beta[j];
                hess[(j, j)] = 1.0;
            }
            hess[(d, d)] = 1e-10;
            for (row, &t) in z.iter().zip(y) {
                let m = row.iter().zip(beta.iter()).map(|(a, b)| a * b).sum::<f64>() + beta[d];
                let p = sigmoid(m);
                let r = c * (p - t);
                let w = c * p * (1.0 - p);
                let ext = |k: usize| if k < d { row[k] } else { 1.0 };
                for a in 0..=d {
                    grad[a] += r * ext(a);
                    let wa = w * ext(a);
                    for b in 0..=a {
                        hess[(a, b)] += wa * ext(b);
                    }
                }
            }
            if grad.amax() < params.tol {
                break;
            }
            for a in 0..=d {
                for b in 0..a {
                    hess[(b, a)] = hess[(a, b)];
                }
            }
            let step = match hess.cholesky() {
                Some(ch) => ch.solve(&grad),
                None => grad.clone(),
            };
            let mut t = 1.0;
            let slope = grad.dot(&step);
            let mut accepted = false;
            for _ in 0..40 {
                let cand = &beta - t * &step;
                let cand_obj = objective(&z, y, &cand, c);
                if cand_obj <= obj - 1e-4 * t * slope {
                    beta = cand;
                    obj = cand_obj;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        LogisticRegression {
            scaler,
            weights: beta.rows(0, d).iter().copied().collect(),
            intercept: beta[d],
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let z = self.scaler.apply(row);
        sigmoid(z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.intercept)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NaiveBayesParams {
    /// Added to every variance, as a fraction of the largest feature variance.
    pub var_smoothing: f64,
}

impl Default for NaiveBayesParams {
    fn default() -> Self {
        NaiveBayesParams { var_smoothing: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    log_prior: [f64; 2],
    mean: [Vec<f64>; 2],
    var: [Vec<f64>; 2],
}

impl GaussianNb {
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: &NaiveBayesParams) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let overall = Standardizer::fit(x);
        let max_var = overall.scale.iter().map(|s| s * s).fold(0.0, f64::max);
        let eps = (params.var_smoothing * max_var).max(1e-12);
        let n = x.len() as f64;
        let mut nb = GaussianNb {
            log_prior: [0.0; 2],
            mean: [vec![0.0; d], vec![0.0; d]],
            var: [vec![0.0; d], vec![0.0; d]],
        };
        for c in 0..2 {
            let rows: Vec<&Vec<f64>> = x
                .iter()
                .zip(y)
                .filter(|(_, &t)| (t >= 0.5) == (c == 1))
                .map(|(r, _)| r)
                .collect();
            let k = rows.len() as f64;
            nb.log_prior[c] = (k / n).ln();
            for j in 0..d {
                let m = rows.iter().map(|r| r[j]).sum::<f64>() / k;
                let v = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / k;
                nb.mean[c][j] = m;
                nb.var[c][j] = v + eps;
            }
        }
        nb
    }

    fn log_joint(&self, c: usize, row: &[f64]) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        self.log_prior[c]
            + row
                .iter()
                .zip(self.mean[c].iter().zip(&self.var[c]))
                .map(|(x, (m, v))| -0.5 * (two_pi * v).ln() - (x - m).powi(2) / (2.0 * v))
                .sum::<f64>()
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        sigmoid(self.log_joint(1, row) - self.log_joint(0, row))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_set_is_fit_perfectly() {
        let x = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.5],
            vec![0.5, 1.0],
            vec![3.0, 3.0],
            vec![4.0, 3.5],
            vec![3.5, 4.0],
        ];
        let y = vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let m = LogisticRegression::fit(&x, &y, &LogisticParams::default());
        for (r, &t) in x.iter().zip(&y) {
            assert_eq!((m.predict(r) > 0.5) as u8 as f64, t);
        }
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        // Independent check of the optimality condition in standardized space.
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, ((i * 17) % 9) as f64]).collect();
        let y: Vec<f64> = (0..40).map(|i| ((i * 31) % 7 < 3 || i > 30) as u8 as f64).collect();
        let c = 0.7;
        let m = LogisticRegression::fit(&x, &y, &LogisticParams { c, ..Default::default() });
        let mut g = m.weights.clone();
        let mut gb = 0.0;
        for (r, &t) in x.iter().zip(&y) {
            let z = m.scaler.apply(r);
            let resid = c * (m.predict(r) - t);
            for j in 0..2 {
                g[j] += resid * z[j];
            }
            gb += resid;
        }
        assert!(g.iter().all(|v| v.abs() < 1e-6), "{g:?}");
        assert!(gb.abs() < 1e-6);
    }

    #[test]
    fn naive_bayes_matches_hand_computed_posterior() {
        let x = vec![vec![0.0], vec![2.0], vec![4.0], vec![6.0]];
        let y = vec![0.0, 0.0, 1.0, 1.0];
        let nb = GaussianNb::fit(&x, &y, &NaiveBayesParams { var_smoothing: 0.0 });
        // Class means 1 and 5, both variances 1, equal priors: the log-odds
        // at x are ((x-1)^2 - (x-5)^2) / 2.
        let x0: f64 = 3.5;
        let want = sigmoid(((x0 - 1.0).powi(2) - (x0 - 5.0).powi(2)) / 2.0);
        assert!((nb.predict(&[x0]) - want).abs() < 1e-9);
    }

    #[test]
    fn stable_helpers() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((softplus(800.0) - 800.0).abs() < 1e-9);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
