//! One-hidden-layer perceptron: ReLU hidden units, sigmoid output,
//! cross-entropy loss with L2 weight decay, trained by mini-batch Adam.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::math::{exp, log, sigmoid, sqrt};
use crate::preprocess::FeatureMatrix;
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// L2 penalty `alpha / 2 * ||W||^2` on weights (not biases).
    pub alpha: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self { hidden: 16, learning_rate: 1e-3, epochs: 200, batch_size: 32, alpha: 1e-4, seed: 0 }
    }
}

/// Weights are stored flat: `w1` (hidden x p, row-major), `b1` (hidden),
/// `w2` (hidden), `b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub n_features: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init(n_features: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = rng::stream(seed, "mlp-init", &[]);
        let mut uniform = |fan_in: usize, fan_out: usize, len: usize| -> Vec<f64> {
            let limit = sqrt(6.0 / (fan_in + fan_out) as f64);
            (0..len).map(|_| rng.random_range(-limit..limit)).collect()
        };
        let w1 = uniform(n_features, hidden, hidden * n_features);
        let w2 = uniform(hidden, 1, hidden);
        Self { n_features, hidden, w1, b1: vec![0.0; hidden], w2, b2: 0.0 }
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        let (a, rest) = v.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, d) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2 = d[0];
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        let p = self.n_features;
        let mut z = self.b2;
        for h in 0..self.hidden {
            let a = self.b1[h] + self.w1[h * p..(h + 1) * p].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            if a > 0.0 {
                z += self.w2[h] * a;
            }
        }
        z
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }

    /// Mean cross-entropy plus weight decay over `rows`, and its gradient in
    /// the flat parameter layout.
    pub fn loss_and_grad(&self, data: &FeatureMatrix, rows: &[usize], alpha: f64) -> (f64, Vec<f64>) {
        let p = self.n_features;
        let hd = self.hidden;
        let mut grad = vec![0.0; self.n_params()];
        let (gw1, rest) = grad.split_at_mut(hd * p);
        let (gb1, rest) = rest.split_at_mut(hd);
        let (gw2, gb2) = rest.split_at_mut(hd);
        let mut loss = 0.0;
        let mut act = vec![0.0; hd];
        let m = rows.len() as f64;
        for &i in rows {
            let x = data.row(i);
            let y = if data.labels()[i] { 1.0 } else { 0.0 };
            let mut z = self.b2;
            for h in 0..hd {
                let a = self.b1[h] + self.w1[h * p..(h + 1) * p].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                act[h] = a;
                if a > 0.0 {
                    z += self.w2[h] * a;
                }
            }
            // log(1 + e^z) - y z
            loss += if z > 0.0 { z + log(1.0 + exp(-z)) } else { log(1.0 + exp(z)) } - y * z;
            let dz = (sigmoid(z) - y) / m;
            gb2[0] += dz;
            for h in 0..hd {
                if act[h] > 0.0 {
                    gw2[h] += dz * act[h];
                    let da = dz * self.w2[h];
                    gb1[h] += da;
                    for j in 0..p {
                        gw1[h * p + j] += da * x[j];
                    }
                }
            }
        }
        loss /= m;
        let mut decay = 0.0;
        for (g, w) in gw1.iter_mut().zip(&self.w1) {
            *g += alpha * w;
            decay += w * w;
        }
        for (g, w) in gw2.iter_mut().zip(&self.w2) {
            *g += alpha * w;
            decay += w * w;
        }
        (loss + 0.5 * alpha * decay, grad)
    }
}

pub fn train_mlp(train: &FeatureMatrix, params: &MlpParams) -> Result<Mlp> {
    if params.hidden < 1 {
        return Err(Error::InvalidParam("hidden units must be >= 1".into()));
    }
    if params.batch_size < 1 || !(params.learning_rate > 0.0) || !(params.alpha >= 0.0) {
        return Err(Error::InvalidParam("batch_size >= 1, learning_rate > 0 and alpha >= 0 required".into()));
    }
    let n = train.n_rows();
    let pos = train.positives();
    if pos == 0 || pos == n {
        return Err(Error::SingleClass);
    }
    let mut net = Mlp::init(train.n_features(), params.hidden, params.seed);
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut theta = net.to_flat();
    let mut m1 = vec![0.0; theta.len()];
    let mut m2 = vec![0.0; theta.len()];
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..params.epochs {
        let mut rng = rng::stream(params.seed, "mlp-epoch", &[epoch as u64]);
        rng::shuffle(&mut rng, &mut order);
        for batch in order.chunks(params.batch_size) {
            net.set_flat(&theta);
            let (_, g) = net.loss_and_grad(train, batch, params.alpha);
            step += 1;
            let c1 = 1.0 - libm::pow(b1, f64::from(step));
            let c2 = 1.0 - libm::pow(b2, f64::from(step));
            for k in 0..theta.len() {
                m1[k] = b1 * m1[k] + (1.0 - b1) * g[k];
                m2[k] = b2 * m2[k] + (1.0 - b2) * g[k] * g[k];
                theta[k] -= params.learning_rate * (m1[k] / c1) / (sqrt(m2[k] / c2) + eps);
            }
        }
    }
    net.set_flat(&theta);
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::String;

    fn data(n: usize, seed: u64) -> FeatureMatrix {
        let mut rng = rng::from_seed(seed);
        let names: Vec<String> = (0..3).map(|j| format!("x{j}")).collect();
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let labels = rows.iter().map(|r| r[0] + 0.5 * r[1] > 0.8).collect();
        FeatureMatrix::from_rows(names, &rows, labels).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = data(20, 1);
        let net = Mlp::init(3, 5, 9);
        let rows: Vec<usize> = (0..20).collect();
        let (_, g) = net.loss_and_grad(&m, &rows, 1e-3);
        let theta = net.to_flat();
        let mut probe = net.clone();
        for k in 0..theta.len() {
            let mut t = theta.clone();
            t[k] += 1e-5;
            probe.set_flat(&t);
            let up = probe.loss_and_grad(&m, &rows, 1e-3).0;
            t[k] -= 2e-5;
            probe.set_flat(&t);
            let down = probe.loss_and_grad(&m, &rows, 1e-3).0;
            let fd = (up - down) / 2e-5;
            assert!((fd - g[k]).abs() <= 1e-6 + 1e-4 * fd.abs().max(g[k].abs()), "param {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn learns_a_linear_boundary() {
        let m = data(300, 2);
        let net = train_mlp(&m, &MlpParams { epochs: 100, learning_rate: 1e-2, ..Default::default() }).unwrap();
        let correct = (0..300).filter(|&i| (net.probability(m.row(i)) >= 0.5) == m.labels()[i]).count();
        assert!(correct > 255, "{correct}");
    }

    #[test]
    fn init_respects_glorot_bound() {
        let net = Mlp::init(10, 6, 3);
        let limit = sqrt(6.0 / 16.0);
        assert!(net.w1.iter().all(|w| w.abs() <= limit));
    }
}
