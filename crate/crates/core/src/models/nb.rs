//! Gaussian naive Bayes.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::{log, sigmoid};
use crate::preprocess::FeatureMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NbParams {
    /// Prior probability of the positive class; `None` uses the training
    /// class frequency.
    pub positive_prior: Option<f64>,
    pub var_floor: f64,
}

impl Default for NbParams {
    fn default() -> Self {
        Self { positive_prior: None, var_floor: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Per-class (negative, positive) means and variances.
    pub means: [Vec<f64>; 2],
    pub vars: [Vec<f64>; 2],
    pub positive_prior: f64,
}

pub fn train_nb(train: &FeatureMatrix, params: &NbParams) -> Result<GaussianNb> {
    if let Some(p) = params.positive_prior {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParam("positive_prior must be in (0, 1)".into()));
        }
    }
    if !(params.var_floor > 0.0) {
        return Err(Error::InvalidParam("var_floor must be > 0".into()));
    }
    let (n, p) = (train.n_rows(), train.n_features());
    let pos = train.positives();
    if pos == 0 || pos == n {
        return Err(Error::SingleClass);
    }
    let mut means = [alloc::vec![0.0; p], alloc::vec![0.0; p]];
    let mut vars = [alloc::vec![0.0; p], alloc::vec![0.0; p]];
    let counts = [(n - pos) as f64, pos as f64];
    for i in 0..n {
        let c = usize::from(train.labels()[i]);
        for (m, v) in means[c].iter_mut().zip(train.row(i)) {
            *m += v;
        }
    }
    for c in 0..2 {
        means[c].iter_mut().for_each(|m| *m /= counts[c]);
    }
    for i in 0..n {
        let c = usize::from(train.labels()[i]);
        for j in 0..p {
            let d = train.value(i, j) - means[c][j];
            vars[c][j] += d * d;
        }
    }
    for c in 0..2 {
        vars[c].iter_mut().for_each(|v| *v = (*v / counts[c]).max(params.var_floor));
    }
    Ok(GaussianNb { means, vars, positive_prior: params.positive_prior.unwrap_or(pos as f64 / n as f64) })
}

impl GaussianNb {
    /// Posterior log-odds of the positive class.
    pub fn log_odds(&self, x: &[f64]) -> f64 {
        let ll = |c: usize| -> f64 {
            x.iter()
                .zip(&self.means[c])
                .zip(&self.vars[c])
                .map(|((&v, &m), &s2)| -0.5 * log(s2) - (v - m) * (v - m) / (2.0 * s2))
                .sum()
        };
        log(self.positive_prior) - log(1.0 - self.positive_prior) + ll(1) - ll(0)
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.log_odds(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::String;
    use alloc::vec;

    #[test]
    fn symmetric_midpoint_is_half() {
        let rows = [vec![0.0], vec![0.2], vec![0.8], vec![1.0]];
        let m = FeatureMatrix::from_rows(vec![String::from("x")], &rows, vec![false, false, true, true]).unwrap();
        let nb = train_nb(&m, &NbParams::default()).unwrap();
        assert!((nb.probability(&[0.5]) - 0.5).abs() < 1e-12);
        assert!(nb.probability(&[0.9]) > 0.99);
    }

    #[test]
    fn constant_feature_uses_floor() {
        let rows = [vec![1.0, 0.0], vec![1.0, 0.2], vec![1.0, 0.8], vec![1.0, 1.0]];
        let m = FeatureMatrix::from_rows(vec![String::from("c"), String::from("x")], &rows, vec![false, false, true, true]).unwrap();
        let nb = train_nb(&m, &NbParams::default()).unwrap();
        assert_eq!(nb.vars[0][0], 1e-9);
        assert!(nb.probability(&[1.0, 0.5]).is_finite());
    }

    #[test]
    fn prior_shifts_log_odds() {
        let rows = [vec![0.0], vec![0.2], vec![0.8], vec![1.0]];
        let m = FeatureMatrix::from_rows(vec![String::from("x")], &rows, vec![false, false, true, true]).unwrap();
        let nb = train_nb(&m, &NbParams { positive_prior: Some(0.2), ..Default::default() }).unwrap();
        assert!((nb.log_odds(&[0.5]) - log(0.25)).abs() < 1e-12);
    }
}
