use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Tree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: Option<usize>,
    /// Features drawn per split; `None` means `round(sqrt(d))`.
    pub max_features: Option<usize>,
    pub min_samples_leaf: usize,
    /// Draw each bootstrap with equal counts from both classes.
    pub balanced: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 100,
            max_depth: None,
            max_features: None,
            min_samples_leaf: 1,
            balanced: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<Tree>,
}

impl RandomForest {
    /// `y` holds 0/1 class indicators.
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: &ForestParams, seed: u64) -> RandomForest {
        let n = x.len();
        let d = x.first().map_or(0, Vec::len);
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
            max_features: Some(
                params
                    .max_features
                    .unwrap_or_else(|| ((d as f64).sqrt().round() as usize).max(1)),
            ),
        };
        let by_class: [Vec<usize>; 2] = [
            (0..n).filter(|&i| y[i] < 0.5).collect(),
            (0..n).filter(|&i| y[i] >= 0.5).collect(),
        ];
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let seeds: Vec<u64> = (0..params.trees).map(|_| master.random()).collect();
        let trees = seeds
            .into_par_iter()
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let mut counts = vec![0.0; n];
                if params.balanced {
                    let m = by_class[0].len().min(by_class[1].len());
                    for class in &by_class {
                        for _ in 0..m {
                            counts[class[rng.random_range(0..class.len())]] += 1.0;
                        }
                    }
                } else {
                    for _ in 0..n {
                        counts[rng.random_range(0..n)] += 1.0;
                    }
                }
                let idx: Vec<usize> = (0..n).filter(|&i| counts[i] > 0.0).collect();
                Tree::fit(x, y, &counts, idx, &tree_params, &mut rng)
            })
            .collect();
        RandomForest { trees }
    }

    #[cfg(test)]
    pub(crate) fn from_trees(trees: Vec<Tree>) -> Self {
        RandomForest { trees }
    }

    /// Mean of the trees' leaf class-1 frequencies.
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }
}
