//! Random forest of Gini CART trees grown on bootstrap samples.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::models::grow::{self, Criterion, Growth, SortedColumns};
use crate::models::tree::{EnsembleKind, TreeEnsemble};
use crate::preprocess::FeatureMatrix;
use crate::{math, rng};
use crate::{Error, Result};

/// Number of candidate columns drawn at each split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    All,
    Count(usize),
    Fraction(f64),
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => math::sqrt(p as f64) as usize,
            MaxFeatures::Log2 => libm::log2(p as f64) as usize,
            MaxFeatures::All => p,
            MaxFeatures::Count(k) => k,
            MaxFeatures::Fraction(f) => (f * p as f64) as usize,
        };
        k.clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestParams {
    pub n_estimators: usize,
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_estimators: 100, max_depth: None, min_samples_leaf: 1, max_features: MaxFeatures::Sqrt, bootstrap: true, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ClassStats {
    w: f64,
    pos: f64,
}

fn gini(s: &ClassStats) -> f64 {
    if s.w <= 0.0 {
        return 0.0;
    }
    let p = s.pos / s.w;
    2.0 * p * (1.0 - p)
}

struct Gini<'a> {
    weights: &'a [f64],
    labels: &'a [bool],
    min_leaf: f64,
}

impl Criterion for Gini<'_> {
    type Stats = ClassStats;

    #[inline]
    fn row_stats(&self, row: usize) -> ClassStats {
        let w = self.weights[row];
        ClassStats { w, pos: if self.labels[row] { w } else { 0.0 } }
    }

    #[inline]
    fn add(acc: &mut ClassStats, s: &ClassStats) {
        acc.w += s.w;
        acc.pos += s.pos;
    }

    #[inline]
    fn sub(a: &ClassStats, b: &ClassStats) -> ClassStats {
        ClassStats { w: a.w - b.w, pos: a.pos - b.pos }
    }

    fn split_gain(&self, parent: &ClassStats, left: &ClassStats, right: &ClassStats) -> Option<f64> {
        if left.w < self.min_leaf || right.w < self.min_leaf {
            return None;
        }
        let gain = gini(parent) - (left.w / parent.w) * gini(left) - (right.w / parent.w) * gini(right);
        (gain > 1e-12).then_some(gain)
    }

    fn splittable(&self, s: &ClassStats) -> bool {
        s.w >= 2.0 * self.min_leaf && s.pos > 0.0 && s.pos < s.w
    }

    fn leaf_weight(&self, s: &ClassStats) -> f64 {
        if s.w > 0.0 {
            s.pos / s.w
        } else {
            0.0
        }
    }

    fn cover(&self, s: &ClassStats) -> f64 {
        s.w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestFit {
    pub ensemble: TreeEnsemble,
    /// Mean out-of-bag probability per training row; `None` for rows that
    /// landed in every bootstrap sample.
    pub oob: Vec<Option<f64>>,
}

pub fn train_random_forest(train: &FeatureMatrix, params: &ForestParams) -> Result<ForestFit> {
    let n = train.n_rows();
    let p = train.n_features();
    if params.n_estimators < 1 {
        return Err(Error::InvalidParam("n_estimators must be >= 1".into()));
    }
    if params.min_samples_leaf < 1 {
        return Err(Error::InvalidParam("min_samples_leaf must be >= 1".into()));
    }
    if let MaxFeatures::Fraction(f) = params.max_features {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidParam("max_features fraction must be in (0, 1]".into()));
        }
    }
    let pos = train.positives();
    if pos == 0 || pos == n {
        return Err(Error::SingleClass);
    }
    let mtry = params.max_features.resolve(p);
    let max_depth = params.max_depth.unwrap_or(usize::MAX);
    let sorted = SortedColumns::new(train);
    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut oob_sum = vec![0.0; n];
    let mut oob_count = vec![0u32; n];
    for t in 0..params.n_estimators {
        let mut rng = rng::stream(params.seed, "forest-tree", &[t as u64]);
        let mut weights = vec![0.0; n];
        if params.bootstrap {
            for _ in 0..n {
                weights[rng.random_range(0..n)] += 1.0;
            }
        } else {
            weights.iter_mut().for_each(|w| *w = 1.0);
        }
        let keep: Vec<bool> = weights.iter().map(|&w| w > 0.0).collect();
        let rows: Vec<u32> = (0..n as u32).filter(|&r| keep[r as usize]).collect();
        let crit = Gini { weights: &weights, labels: train.labels(), min_leaf: params.min_samples_leaf as f64 };
        let mut order: Vec<usize> = (0..p).collect();
        let tree = grow::grow(&crit, train, sorted.restrict(&keep), &rows, max_depth, Growth::Depthwise, || {
            // partial Fisher-Yates draw of `mtry` columns; draw order breaks gain ties
            for i in 0..mtry.min(p - 1) {
                let j = rng.random_range(i..p);
                order.swap(i, j);
            }
            let mut ranks = vec![grow::UNRANKED; p];
            for (i, &f) in order[..mtry].iter().enumerate() {
                ranks[f] = i as u32;
            }
            ranks
        });
        for r in 0..n {
            if !keep[r] {
                oob_sum[r] += tree.predict(train.row(r), train.row_mask(r));
                oob_count[r] += 1;
            }
        }
        trees.push(tree);
    }
    let oob = oob_sum.iter().zip(&oob_count).map(|(&s, &c)| (c > 0).then(|| s / f64::from(c))).collect();
    Ok(ForestFit {
        ensemble: TreeEnsemble { trees, base_margin: 0.0, kind: EnsembleKind::Bagged, learning_rate: 1.0, n_features: p },
        oob,
    })
}
