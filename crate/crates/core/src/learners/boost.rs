use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::{sigmoid, softplus};
use super::tree::{Tree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogitBoostParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Working responses are clipped to `[-z_max, z_max]`.
    pub z_max: f64,
}

impl Default for LogitBoostParams {
    fn default() -> Self {
        LogitBoostParams {
            rounds: 50,
            max_depth: 3,
            min_samples_leaf: 5,
            z_max: 4.0,
        }
    }
}

/// Additive logistic regression (Friedman, Hastie, Tibshirani) with
/// weighted regression trees as the base learner. `F` is half the log-odds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitBoost {
    stages: Vec<(f64, Tree)>,
    /// Mean training log-loss before the first round and after each round.
    pub train_loss: Vec<f64>,
}

fn mean_loss(f: &[f64], y: &[f64]) -> f64 {
    f.iter()
        .zip(y)
        .map(|(&fi, &t)| softplus(2.0 * fi) - t * 2.0 * fi)
        .sum::<f64>()
        / f.len() as f64
}

impl LogitBoost {
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: &LogitBoostParams, seed: u64) -> Self {
        let n = x.len();
        let tree_params = TreeParams {
            max_depth: Some(params.max_depth),
            min_samples_leaf: params.min_samples_leaf,
            max_features: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = vec![0.0; n];
        let mut loss = mean_loss(&f, y);
        let mut model = LogitBoost {
            stages: Vec::new(),
            train_loss: vec![loss],
        };
        for _ in 0..params.rounds {
            let mut w = vec![0.0; n];
            let mut z = vec![0.0; n];
            for i in 0..n {
                let p = sigmoid(2.0 * f[i]);
                w[i] = (p * (1.0 - p)).max(1e-10);
                z[i] = ((y[i] - p) / w[i]).clamp(-params.z_max, params.z_max);
            }
            let tree = Tree::fit(x, &z, &w, (0..n).collect(), &tree_params, &mut rng);
            let delta: Vec<f64> = x.iter().map(|r| 0.5 * tree.predict(r)).collect();
            // The step is a descent direction; halve it until the loss does
            // not rise so the training loss is monotone.
            let mut eta = 1.0;
            let mut accepted = None;
            for _ in 0..30 {
                let cand: Vec<f64> = f.iter().zip(&delta).map(|(a, b)| a + eta * b).collect();
                let l = mean_loss(&cand, y);
                if l <= loss {
                    accepted = Some((cand, l));
                    break;
                }
                eta *= 0.5;
            }
            match accepted {
                Some((cand, l)) => {
                    f = cand;
                    loss = l;
                    model.stages.push((eta, tree));
                }
                None => {
                    model.train_loss.push(loss);
                    break;
                }
            }
            model.train_loss.push(loss);
        }
        model
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let f: f64 = self.stages.iter().map(|(eta, t)| eta * 0.5 * t.predict(row)).sum();
        sigmoid(2.0 * f)
    }

    pub fn rounds(&self) -> usize {
        self.stages.len()
    }
}
