//! Stratified k-fold plans and SMOTE oversampling of training folds.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::preprocess::FeatureMatrix;
use crate::rng::{self, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

/// Stratified k-fold partition. Each class is shuffled and dealt round-robin
/// into the folds; the second class continues the deal where the first
/// stopped so fold sizes differ by at most one.
pub fn make_folds(labels: &[bool], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidParam(format!("fold count {k} < 2")));
    }
    let mut rng = rng::stream(seed, "folds", &[]);
    let mut assignment = alloc::vec![0usize; labels.len()];
    let mut next = 0usize;
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < k {
            return Err(Error::ClassTooSmall { label: class, count: idx.len(), needed: k });
        }
        rng::shuffle(&mut rng, &mut idx);
        for i in idx {
            assignment[i] = next % k;
            next += 1;
        }
    }
    let folds = (0..k)
        .map(|f| Fold {
            train: (0..labels.len()).filter(|&i| assignment[i] != f).collect(),
            val: (0..labels.len()).filter(|&i| assignment[i] == f).collect(),
        })
        .collect();
    Ok(FoldPlan { k, seed, folds })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoteParams {
    pub k_neighbors: usize,
    /// Minority/majority ratio after augmentation.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteParams {
    fn default() -> Self {
        Self { k_neighbors: 5, target_ratio: 1.0, seed: 0 }
    }
}

/// Where a synthetic row came from: `x = x[parent] + u * (x[neighbor] - x[parent])`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticOrigin {
    pub parent: usize,
    pub neighbor: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Smoted {
    pub matrix: FeatureMatrix,
    /// One entry per appended row, in append order; indices refer to input rows.
    pub origins: Vec<SyntheticOrigin>,
}

/// Number of minority rows required to reach `target_ratio`.
pub fn smote_target(majority: usize, target_ratio: f64) -> usize {
    crate::math::round(majority as f64 * target_ratio) as usize
}

/// Append synthetic minority rows until `minority / majority` reaches
/// `target_ratio`. Parents are cycled round-robin over the minority rows in
/// index order; each synthetic row interpolates towards one of the parent's
/// `k_neighbors` nearest minority neighbours (Euclidean, exact search).
pub fn smote_oversample(train: &FeatureMatrix, params: &SmoteParams) -> Result<Smoted> {
    let mut rng = rng::from_seed(params.seed);
    smote_with_rng(train, params, &mut rng)
}

pub(crate) fn smote_with_rng(train: &FeatureMatrix, params: &SmoteParams, rng: &mut Rng) -> Result<Smoted> {
    if params.k_neighbors < 1 {
        return Err(Error::InvalidParam("k_neighbors must be >= 1".into()));
    }
    if !(params.target_ratio > 0.0) {
        return Err(Error::InvalidParam("target_ratio must be > 0".into()));
    }
    if !train.is_fully_observed() {
        return Err(Error::InvalidParam("SMOTE requires an imputed matrix".into()));
    }
    let positives = train.positives();
    let negatives = train.n_rows() - positives;
    let minority_label = positives <= negatives;
    let minority: Vec<usize> = (0..train.n_rows()).filter(|&i| train.labels()[i] == minority_label).collect();
    let majority = train.n_rows() - minority.len();
    let target = smote_target(majority, params.target_ratio);
    let mut out = Smoted { matrix: train.clone(), origins: Vec::new() };
    if target <= minority.len() {
        return Ok(out);
    }
    if minority.len() <= params.k_neighbors {
        return Err(Error::ClassTooSmall { label: minority_label, count: minority.len(), needed: params.k_neighbors + 1 });
    }
    let neighbors = nearest_neighbors(train, &minority, params.k_neighbors);
    let p = train.n_features();
    let mut row = alloc::vec![0.0; p];
    for s in 0..target - minority.len() {
        let slot = s % minority.len();
        let parent = minority[slot];
        let neighbor = minority[neighbors[slot][rng.random_range(0..params.k_neighbors)]];
        let u: f64 = rng.random();
        let (xa, xb) = (train.row(parent), train.row(neighbor));
        for j in 0..p {
            row[j] = xa[j] + u * (xb[j] - xa[j]);
        }
        let id: String = format!("smote-{s}:{}~{}", train.row_ids()[parent], train.row_ids()[neighbor]);
        out.matrix.push_synthetic(&row, minority_label, id);
        out.origins.push(SyntheticOrigin { parent, neighbor });
    }
    Ok(out)
}

/// For each minority row, the positions (into `minority`) of its `k` nearest
/// other minority rows, ties broken by position.
fn nearest_neighbors(m: &FeatureMatrix, minority: &[usize], k: usize) -> Vec<Vec<usize>> {
    minority
        .iter()
        .enumerate()
        .map(|(a, &ia)| {
            let xa = m.row(ia);
            let mut dists: Vec<(f64, usize)> = minority
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(b, &ib)| {
                    let d: f64 = xa.iter().zip(m.row(ib)).map(|(x, y)| (x - y) * (x - y)).sum();
                    (d, b)
                })
                .collect();
            let by_distance = |l: &(f64, usize), r: &(f64, usize)| l.0.total_cmp(&r.0).then(l.1.cmp(&r.1));
            dists.select_nth_unstable_by(k - 1, by_distance);
            dists.truncate(k);
            dists.sort_by(by_distance);
            dists.into_iter().map(|(_, b)| b).collect()
        })
        .collect()
}

/// SMOTE seed for a fold, derived from the run seed.
pub fn fold_smote_params(base: &SmoteParams, root_seed: u64, fold: usize) -> SmoteParams {
    SmoteParams { seed: rng::derive_seed(root_seed, "smote", &[fold as u64]), ..*base }
}
