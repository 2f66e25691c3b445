//! Weighted CART on squared error. For 0/1 targets the squared-error split
//! criterion ranks splits exactly as Gini impurity does, so the same grower
//! serves classification forests (leaf = class-1 frequency) and the
//! regression trees inside LogitBoost.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features drawn per split; `None` examines all.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

struct Stats {
    w: f64,
    wy: f64,
    wyy: f64,
}

impl Stats {
    fn sse(&self) -> f64 {
        if self.w <= 0.0 {
            0.0
        } else {
            (self.wyy - self.wy * self.wy / self.w).max(0.0)
        }
    }
}

fn stats(idx: &[usize], y: &[f64], w: &[f64]) -> Stats {
    let mut s = Stats {
        w: 0.0,
        wy: 0.0,
        wyy: 0.0,
    };
    for &i in idx {
        s.w += w[i];
        s.wy += w[i] * y[i];
        s.wyy += w[i] * y[i] * y[i];
    }
    s
}

struct Best {
    feature: usize,
    threshold: f64,
    sse: f64,
}

#[allow(clippy::too_many_arguments)]
/// Best split of `idx` on `feature`, as (threshold, children's summed SSE).
fn best_split_on(
    x: &[Vec<f64>],
    y: &[f64],
    w: &[f64],
    idx: &[usize],
    feature: usize,
    min_leaf: usize,
    total: &Stats,
    order: &mut Vec<(f64, usize)>,
) -> Option<(f64, f64)> {
    order.clear();
    order.extend(idx.iter().map(|&i| (x[i][feature], i)));
    order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    if order[0].0 == order[order.len() - 1].0 {
        return None;
    }
    let (mut lw, mut lwy, mut lwyy) = (0.0, 0.0, 0.0);
    let mut best: Option<(f64, f64)> = None;
    let n = order.len();
    for k in 0..n - 1 {
        let i = order[k].1;
        lw += w[i];
        lwy += w[i] * y[i];
        lwyy += w[i] * y[i] * y[i];
        if order[k].0 == order[k + 1].0 || k + 1 < min_leaf || n - k - 1 < min_leaf {
            continue;
        }
        let left = Stats {
            w: lw,
            wy: lwy,
            wyy: lwyy,
        };
        let right = Stats {
            w: total.w - lw,
            wy: total.wy - lwy,
            wyy: total.wyy - lwyy,
        };
        let sse = left.sse() + right.sse();
        if best.is_none_or(|(_, b)| sse < b) {
            let mut threshold = (order[k].0 + order[k + 1].0) / 2.0;
            // Midpoint of adjacent floats can round up to the right value.
            if threshold >= order[k + 1].0 {
                threshold = order[k].0;
            }
            best = Some((threshold, sse));
        }
    }
    best
}

impl Tree {
    /// Grow a tree on the rows in `idx` with per-row weights `w`.
    pub fn fit<R: Rng>(
        x: &[Vec<f64>],
        y: &[f64],
        w: &[f64],
        idx: Vec<usize>,
        params: &TreeParams,
        rng: &mut R,
    ) -> Tree {
        let n_features = x.first().map_or(0, Vec::len);
        let mtry = params.max_features.unwrap_or(n_features).clamp(1, n_features.max(1));
        let min_leaf = params.min_samples_leaf.max(1);
        let mut nodes = vec![Node::Leaf(0.0)];
        let mut stack = vec![(0usize, idx, 0usize)];
        let mut features: Vec<usize> = (0..n_features).collect();
        let mut order = Vec::new();
        while let Some((slot, idx, depth)) = stack.pop() {
            let s = stats(&idx, y, w);
            let value = if s.w > 0.0 { s.wy / s.w } else { 0.0 };
            let parent_sse = s.sse();
            let depth_ok = params.max_depth.is_none_or(|d| depth < d);
            if !depth_ok || idx.len() < 2 * min_leaf || parent_sse <= 1e-12 * s.w.max(1.0) {
                nodes[slot] = Node::Leaf(value);
                continue;
            }
            // Draw features in random order; keep looking past `mtry` only
            // until some valid split turns up.
            features.shuffle(rng);
            let mut best: Option<Best> = None;
            for (tried, &f) in features.iter().enumerate() {
                if tried >= mtry && best.is_some() {
                    break;
                }
                if let Some((threshold, sse)) =
                    best_split_on(x, y, w, &idx, f, min_leaf, &s, &mut order)
                {
                    if best.as_ref().is_none_or(|b| sse < b.sse) {
                        best = Some(Best {
                            feature: f,
                            threshold,
                            sse,
                        });
                    }
                }
            }
            let Some(best) = best.filter(|b| b.sse < parent_sse - 1e-12 * parent_sse.max(1.0))
            else {
                nodes[slot] = Node::Leaf(value);
                continue;
            };
            let (l, r): (Vec<usize>, Vec<usize>) = idx
                .into_iter()
                .partition(|&i| x[i][best.feature] <= best.threshold);
            let left = nodes.len();
            nodes.push(Node::Leaf(0.0));
            nodes.push(Node::Leaf(0.0));
            nodes[slot] = Node::Split {
                feature: best.feature,
                threshold: best.threshold,
                left,
                right: left + 1,
            };
            stack.push((left + 1, r, depth + 1));
            stack.push((left, l, depth + 1));
        }
        Tree { nodes }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(v) => return *v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}
