//! Leave-one-feature-out ablation: the change in held-out AUROC when a
//! feature is removed and the model is refitted.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::evaluate::auroc;
use crate::math::{median, quantile_sorted};
use crate::models::artifact::ModelParams;
use crate::par::Executor;
use crate::preprocess::FeatureMatrix;
use crate::resample::{smote_oversample, SmoteParams};
use crate::{rng, Error, Result};

/// Seeds shared by the full model and every reduced model of one repeat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepeatSeeds {
    pub smote: u64,
    pub model: u64,
}

pub fn repeat_seeds(seed: u64, repeat: usize) -> RepeatSeeds {
    RepeatSeeds {
        smote: rng::derive_seed(seed, "ablation-smote", &[repeat as u64]),
        model: rng::derive_seed(seed, "ablation-model", &[repeat as u64]),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub repeat: usize,
    /// Held-out AUROC of the model refitted without the feature.
    pub auroc: Option<f64>,
    /// Full-model AUROC minus `auroc`.
    pub delta: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAblation {
    pub feature: String,
    pub cells: Vec<AblationCell>,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub repeats: usize,
    pub seeds: Vec<RepeatSeeds>,
    /// Full-model held-out AUROC per repeat.
    pub baseline: Vec<Option<f64>>,
    pub features: Vec<FeatureAblation>,
}

fn fit_and_score(train: &FeatureMatrix, test: &FeatureMatrix, params: &ModelParams, smote: &SmoteParams, seeds: RepeatSeeds) -> Result<f64> {
    let smoted = smote_oversample(train, &SmoteParams { seed: seeds.smote, ..*smote })?;
    let model = params.with_seed(seeds.model).fit(&smoted.matrix)?;
    auroc(&model.predict_proba(test)?, test.labels())
}

/// For each feature and repeat, refit `params` on the oversampled training
/// matrix without that feature and score the test matrix. Within a repeat the
/// full and reduced fits share the SMOTE and model seeds. Failed fits are
/// recorded per cell.
pub fn ablation_study<E: Executor>(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    params: &ModelParams,
    smote: &SmoteParams,
    repeats: usize,
    seed: u64,
    exec: &E,
) -> Result<AblationResult> {
    let p = train.n_features();
    if p < 2 {
        return Err(Error::InvalidParam("ablation needs at least two features".into()));
    }
    if repeats == 0 {
        return Err(Error::InvalidParam("ablation needs at least one repeat".into()));
    }
    if test.feature_names() != train.feature_names() {
        return Err(Error::SchemaMismatch { missing: Vec::new(), extra: Vec::new() });
    }
    let seeds: Vec<RepeatSeeds> = (0..repeats).map(|r| repeat_seeds(seed, r)).collect();
    // cell index = column * repeats + repeat, column p is the full model
    let scores: Vec<Result<f64>> = exec.map((p + 1) * repeats, |cell| {
        let (col, r) = (cell / repeats, cell % repeats);
        if col == p {
            fit_and_score(train, test, params, smote, seeds[r])
        } else {
            fit_and_score(&train.without_column(col), &test.without_column(col), params, smote, seeds[r])
        }
    });
    let baseline: Vec<Option<f64>> = scores[p * repeats..].iter().map(|s| s.as_ref().ok().copied()).collect();
    let features = (0..p)
        .map(|col| {
            let cells: Vec<AblationCell> = (0..repeats)
                .map(|r| match &scores[col * repeats + r] {
                    Ok(a) => AblationCell { repeat: r, auroc: Some(*a), delta: baseline[r].map(|b| b - a), error: None },
                    Err(e) => AblationCell { repeat: r, auroc: None, delta: None, error: Some(e.to_string()) },
                })
                .collect();
            let mut deltas: Vec<f64> = cells.iter().filter_map(|c| c.delta).collect();
            deltas.sort_by(f64::total_cmp);
            let summary = |q: f64| (!deltas.is_empty()).then(|| quantile_sorted(&deltas, q));
            FeatureAblation {
                feature: train.feature_names()[col].clone(),
                median: (!deltas.is_empty()).then(|| median(&deltas)),
                q1: summary(0.25),
                q3: summary(0.75),
                cells,
            }
        })
        .collect();
    Ok(AblationResult { repeats, seeds, baseline, features })
}
