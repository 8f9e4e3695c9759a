//! Penalized logistic regression fitted by accelerated proximal gradient.
//!
//! Objective: `mean(logloss) + R(w) / (C n)` with `R = ||w||^2 / 2` (L2) or
//! `R = ||w||_1` (L1). The intercept is never penalized.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::{sigmoid, soft_threshold, sqrt};
use crate::preprocess::FeatureMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogRegParams {
    pub penalty: Penalty,
    /// Inverse regularization strength.
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        Self { penalty: Penalty::L2, c: 1.0, max_iter: 5000, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogReg {
    pub coef: Vec<f64>,
    pub intercept: f64,
}

impl LogReg {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }
}

pub fn train_logreg(train: &FeatureMatrix, params: &LogRegParams) -> Result<LogReg> {
    if !(params.c > 0.0) {
        return Err(Error::InvalidParam("C must be > 0".into()));
    }
    let (n, p) = (train.n_rows(), train.n_features());
    let pos = train.positives();
    if pos == 0 || pos == n {
        return Err(Error::SingleClass);
    }
    let y: Vec<f64> = train.labels().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    // Lipschitz bound of the mean logloss gradient (trace bound on X^T X / 4n)
    let lip = 0.25 * (0..n).map(|i| 1.0 + train.row(i).iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / n as f64;
    let step = 1.0 / lip;
    let strength = 1.0 / (params.c * n as f64);
    let prox = |v: f64| match params.penalty {
        Penalty::L1 => soft_threshold(v, step * strength),
        Penalty::L2 => v / (1.0 + step * strength),
    };

    let mut w = vec![0.0; p + 1]; // last entry is the intercept
    w[p] = crate::math::logit(pos as f64 / n as f64);
    let mut z = w.clone();
    let mut t = 1.0f64;
    let mut grad = vec![0.0; p + 1];
    for _ in 0..params.max_iter {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..n {
            let x = train.row(i);
            let m = z[p] + x.iter().zip(&z[..p]).map(|(a, b)| a * b).sum::<f64>();
            let r = sigmoid(m) - y[i];
            for j in 0..p {
                grad[j] += r * x[j];
            }
            grad[p] += r;
        }
        let mut next = vec![0.0; p + 1];
        for j in 0..p {
            next[j] = prox(z[j] - step * grad[j] / n as f64);
        }
        next[p] = z[p] - step * grad[p] / n as f64;
        let t_next = (1.0 + sqrt(1.0 + 4.0 * t * t)) / 2.0;
        let beta = (t - 1.0) / t_next;
        let mut change = 0.0f64;
        for j in 0..=p {
            change = change.max((next[j] - w[j]).abs());
            z[j] = next[j] + beta * (next[j] - w[j]);
        }
        w = next;
        t = t_next;
        if change < params.tol {
            break;
        }
    }
    let intercept = w.pop().unwrap_or(0.0);
    Ok(LogReg { coef: w, intercept })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::String;

    fn data() -> FeatureMatrix {
        let names: Vec<String> = (0..2).map(|j| format!("x{j}")).collect();
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 10) as f64 / 10.0, ((i * 7) % 11) as f64 / 11.0]).collect();
        let labels = (0..40).map(|i| (i % 10) >= 6).collect();
        FeatureMatrix::from_rows(names, &rows, labels).unwrap()
    }

    #[test]
    fn infinite_penalty_predicts_prevalence() {
        let m = data();
        for penalty in [Penalty::L1, Penalty::L2] {
            let fit = train_logreg(&m, &LogRegParams { penalty, c: 1e-9, ..Default::default() }).unwrap();
            assert!(fit.coef.iter().all(|w| w.abs() < 1e-6));
            assert!((fit.probability(&[0.3, 0.3]) - 0.4).abs() < 1e-6);
        }
    }

    #[test]
    fn weak_penalty_separates() {
        let m = data();
        let fit = train_logreg(&m, &LogRegParams { c: 100.0, ..Default::default() }).unwrap();
        assert!(fit.coef[0] > 1.0);
        assert!(fit.probability(&[0.9, 0.5]) > fit.probability(&[0.1, 0.5]));
    }

    #[test]
    fn l1_sparsifies_noise() {
        let m = data();
        let fit = train_logreg(&m, &LogRegParams { penalty: Penalty::L1, c: 0.1, ..Default::default() }).unwrap();
        assert!(fit.coef[1].abs() <= fit.coef[0].abs());
    }

    #[test]
    fn rejects_bad_c() {
        assert!(train_logreg(&data(), &LogRegParams { c: 0.0, ..Default::default() }).is_err());
    }
}
