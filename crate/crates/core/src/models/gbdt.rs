//! Second-order gradient boosting for the logistic loss with L1/L2 leaf
//! regularization, exact split search and depthwise or leafwise growth.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::math::{log, logit, sigmoid, soft_threshold};
use crate::models::grow::{self, Criterion, Growth, SortedColumns};
use crate::models::tree::{EnsembleKind, Tree, TreeEnsemble};
use crate::preprocess::FeatureMatrix;
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthPolicy {
    Depthwise,
    Leafwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbdtParams {
    pub eta: f64,
    pub n_rounds: usize,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub subsample: f64,
    pub colsample_bytree: f64,
    pub reg_alpha: f64,
    pub reg_lambda: f64,
    pub growth: GrowthPolicy,
    /// Leaf budget for leafwise growth.
    pub max_leaves: usize,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            eta: 0.1,
            n_rounds: 200,
            max_depth: 4,
            min_child_weight: 1.0,
            subsample: 1.0,
            colsample_bytree: 1.0,
            reg_alpha: 0.0,
            reg_lambda: 1.0,
            growth: GrowthPolicy::Depthwise,
            max_leaves: 31,
            seed: 0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.eta) {
            return Err(Error::InvalidParam("eta must be in (0, 1]".into()));
        }
        if !unit(self.subsample) || !unit(self.colsample_bytree) {
            return Err(Error::InvalidParam("subsample and colsample_bytree must be in (0, 1]".into()));
        }
        if !(self.reg_alpha >= 0.0) || !(self.reg_lambda >= 0.0) || !(self.min_child_weight >= 0.0) {
            return Err(Error::InvalidParam("regularization terms must be >= 0".into()));
        }
        if self.growth == GrowthPolicy::Leafwise && self.max_leaves < 1 {
            return Err(Error::InvalidParam("max_leaves must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct GradStats {
    g: f64,
    h: f64,
    n: f64,
}

struct Newton<'a> {
    grad: &'a [f64],
    hess: &'a [f64],
    alpha: f64,
    lambda: f64,
    min_child_weight: f64,
}

impl Newton<'_> {
    fn score(&self, s: &GradStats) -> f64 {
        let d = s.h + self.lambda;
        if d <= 0.0 {
            return 0.0;
        }
        let t = soft_threshold(s.g, self.alpha);
        t * t / d
    }
}

impl Criterion for Newton<'_> {
    type Stats = GradStats;

    #[inline]
    fn row_stats(&self, row: usize) -> GradStats {
        GradStats { g: self.grad[row], h: self.hess[row], n: 1.0 }
    }

    #[inline]
    fn add(acc: &mut GradStats, s: &GradStats) {
        acc.g += s.g;
        acc.h += s.h;
        acc.n += s.n;
    }

    #[inline]
    fn sub(a: &GradStats, b: &GradStats) -> GradStats {
        GradStats { g: a.g - b.g, h: a.h - b.h, n: a.n - b.n }
    }

    fn split_gain(&self, parent: &GradStats, left: &GradStats, right: &GradStats) -> Option<f64> {
        if left.h < self.min_child_weight || right.h < self.min_child_weight {
            return None;
        }
        let gain = 0.5 * (self.score(left) + self.score(right) - self.score(parent));
        (gain > 0.0).then_some(gain)
    }

    fn splittable(&self, s: &GradStats) -> bool {
        s.n >= 2.0
    }

    fn leaf_weight(&self, s: &GradStats) -> f64 {
        leaf_weight(s.g, s.h, self.alpha, self.lambda)
    }

    fn cover(&self, s: &GradStats) -> f64 {
        s.n
    }
}

/// Regularized Newton leaf weight `-sign(G) max(|G| - alpha, 0) / (H + lambda)`.
pub fn leaf_weight(g: f64, h: f64, alpha: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d <= 0.0 {
        return 0.0;
    }
    -soft_threshold(g, alpha) / d
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtFit {
    pub ensemble: TreeEnsemble,
    /// Mean training logloss after each round.
    pub loss_trace: Vec<f64>,
}

/// Fit one regularized Newton tree to per-row gradients and Hessians.
/// `round` selects the row/column subsampling streams.
pub fn newton_tree(train: &FeatureMatrix, grad: &[f64], hess: &[f64], params: &GbdtParams, round: usize) -> Result<Tree> {
    params.validate()?;
    let n = train.n_rows();
    if grad.len() != n || hess.len() != n {
        return Err(Error::LengthMismatch(grad.len(), n));
    }
    let sorted = SortedColumns::new(train);
    Ok(fit_round(train, &sorted, grad, hess, params, round))
}

fn fit_round(train: &FeatureMatrix, sorted: &SortedColumns, grad: &[f64], hess: &[f64], params: &GbdtParams, round: usize) -> Tree {
    let n = train.n_rows();
    let crit = Newton { grad, hess, alpha: params.reg_alpha, lambda: params.reg_lambda, min_child_weight: params.min_child_weight };
    let (rows, sorted) = if params.subsample < 1.0 {
        let mut rng = rng::stream(params.seed, "gbdt-rows", &[round as u64]);
        let keep: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < params.subsample).collect();
        let rows: Vec<u32> = (0..n as u32).filter(|&r| keep[r as usize]).collect();
        (rows, sorted.restrict(&keep))
    } else {
        ((0..n as u32).collect(), sorted.clone())
    };
    let ranks = grow::index_ranks(&column_mask(train, params, round));
    let growth = match params.growth {
        GrowthPolicy::Depthwise => Growth::Depthwise,
        GrowthPolicy::Leafwise => Growth::Leafwise { max_leaves: params.max_leaves },
    };
    grow::grow(&crit, train, sorted, &rows, params.max_depth, growth, || ranks.clone())
}

/// Per-tree column subsample. Each column is kept independently, keyed by
/// its name, so the draw for one column does not depend on which other
/// columns exist. A round that keeps no column grows a single leaf.
fn column_mask(train: &FeatureMatrix, params: &GbdtParams, round: usize) -> Vec<bool> {
    if params.colsample_bytree >= 1.0 {
        return vec![true; train.n_features()];
    }
    let seed = rng::derive_seed(params.seed, "gbdt-cols", &[round as u64]);
    train.feature_names().iter().map(|name| rng::keyed_unit(seed, name) < params.colsample_bytree).collect()
}

fn logloss(margins: &[f64], labels: &[bool]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(labels)
        .map(|(&m, &y)| {
            // log(1 + e^m) - y m, evaluated stably
            let softplus = if m > 0.0 { m + log(1.0 + crate::math::exp(-m)) } else { log(1.0 + crate::math::exp(m)) };
            softplus - if y { m } else { 0.0 }
        })
        .sum();
    total / margins.len() as f64
}

pub fn train_gbdt(train: &FeatureMatrix, params: &GbdtParams) -> Result<GbdtFit> {
    params.validate()?;
    let n = train.n_rows();
    let pos = train.positives();
    if pos == 0 || pos == n {
        return Err(Error::SingleClass);
    }
    let base = logit(pos as f64 / n as f64);
    let labels = train.labels();
    let sorted = SortedColumns::new(train);
    let mut margin = vec![base; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut loss_trace = Vec::with_capacity(params.n_rounds);
    for round in 0..params.n_rounds {
        for i in 0..n {
            let p = sigmoid(margin[i]);
            grad[i] = p - if labels[i] { 1.0 } else { 0.0 };
            hess[i] = p * (1.0 - p);
        }
        let tree = fit_round(train, &sorted, &grad, &hess, params, round);
        for (i, m) in margin.iter_mut().enumerate() {
            *m += params.eta * tree.predict(train.row(i), train.row_mask(i));
        }
        trees.push(tree);
        loss_trace.push(logloss(&margin, labels));
    }
    Ok(GbdtFit {
        ensemble: TreeEnsemble { trees, base_margin: base, kind: EnsembleKind::Boosted, learning_rate: params.eta, n_features: train.n_features() },
        loss_trace,
    })
}
