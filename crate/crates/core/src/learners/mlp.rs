use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::Standardizer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: 128,
            epochs: 200,
            learning_rate: 0.01,
            l2: 1e-4,
        }
    }
}

/// One tanh hidden layer and a two-way softmax output. Parameters live in
/// one flat vector: W1 (h x d), b1 (h), W2 (2 x h), b2 (2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Network {
    d: usize,
    h: usize,
    params: Vec<f64>,
}

impl Network {
    fn new(d: usize, h: usize, rng: &mut impl Rng) -> Self {
        let mut params = vec![0.0; h * d + h + 2 * h + 2];
        let a1 = (6.0 / (d + h) as f64).sqrt();
        let a2 = (6.0 / (h + 2) as f64).sqrt();
        for p in &mut params[..h * d] {
            *p = rng.random_range(-a1..a1);
        }
        let w2 = h * d + h;
        for p in &mut params[w2..w2 + 2 * h] {
            *p = rng.random_range(-a2..a2);
        }
        Network { d, h, params }
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.h * self.d;
        let w2 = b1 + self.h;
        (b1, w2, w2 + 2 * self.h)
    }

    fn forward(&self, x: &[f64], hidden: &mut [f64]) -> [f64; 2] {
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;
        for j in 0..self.h {
            let row = &p[j * self.d..(j + 1) * self.d];
            let a: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + p[b1 + j];
            hidden[j] = a.tanh();
        }
        let mut out = [0.0; 2];
        for (k, o) in out.iter_mut().enumerate() {
            let row = &p[w2 + k * self.h..w2 + (k + 1) * self.h];
            *o = row.iter().zip(hidden.iter()).map(|(w, v)| w * v).sum::<f64>() + p[b2 + k];
        }
        out
    }

    /// Class-1 probability.
    pub(crate) fn predict(&self, x: &[f64]) -> f64 {
        let mut hidden = vec![0.0; self.h];
        let o = self.forward(x, &mut hidden);
        1.0 / (1.0 + (o[0] - o[1]).exp())
    }

    /// Mean cross-entropy plus `l2/2 * |weights|^2` (biases unpenalized),
    /// and its gradient.
    pub(crate) fn loss_grad(&self, x: &[Vec<f64>], y: &[f64], l2: f64) -> (f64, Vec<f64>) {
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;
        let n = x.len() as f64;
        let mut g = vec![0.0; p.len()];
        let mut loss = 0.0;
        let mut hidden = vec![0.0; self.h];
        let mut dh = vec![0.0; self.h];
        for (row, &t) in x.iter().zip(y) {
            let o = self.forward(row, &mut hidden);
            let m = o[0].max(o[1]);
            let lse = m + ((o[0] - m).exp() + (o[1] - m).exp()).ln();
            let target = [1.0 - t, t];
            loss += (0..2).map(|k| target[k] * (lse - o[k])).sum::<f64>() / n;
            let prob = [(o[0] - lse).exp(), (o[1] - lse).exp()];
            dh.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..2 {
                let dz = (prob[k] - target[k]) / n;
                g[b2 + k] += dz;
                for j in 0..self.h {
                    g[w2 + k * self.h + j] += dz * hidden[j];
                    dh[j] += dz * p[w2 + k * self.h + j];
                }
            }
            for j in 0..self.h {
                let da = dh[j] * (1.0 - hidden[j] * hidden[j]);
                g[b1 + j] += da;
                let gw = &mut g[j * self.d..(j + 1) * self.d];
                for (gv, xv) in gw.iter_mut().zip(row) {
                    *gv += da * xv;
                }
            }
        }
        for i in (0..b1).chain(w2..b2) {
            loss += 0.5 * l2 * p[i] * p[i];
            g[i] += l2 * p[i];
        }
        (loss, g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    scaler: Standardizer,
    net: Network,
}

impl Mlp {
    /// Full-batch Adam on standardized inputs.
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: &MlpParams, seed: u64) -> Self {
        let scaler = Standardizer::fit(x);
        let z: Vec<Vec<f64>> = x.iter().map(|r| scaler.apply(r)).collect();
        let d = scaler.mean.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Network::new(d, params.hidden.max(1), &mut rng);
        let (b1, b2): (f64, f64) = (0.9, 0.999);
        let mut m = vec![0.0; net.params.len()];
        let mut v = vec![0.0; net.params.len()];
        for t in 1..=params.epochs {
            let (_, g) = net.loss_grad(&z, y, params.l2);
            let c1 = 1.0 - b1.powi(t as i32);
            let c2 = 1.0 - b2.powi(t as i32);
            for i in 0..g.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                net.params[i] -= params.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + 1e-8);
            }
        }
        Mlp { scaler, net }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.net.predict(&self.scaler.apply(row))
    }

    /// Layer sizes, input x hidden x output.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.net.d, self.net.h, 2)
    }
}
