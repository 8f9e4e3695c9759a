//! Cartesian hyperparameter grids scored by stratified cross-validated AUROC,
//! with SMOTE applied to each fold's training rows only.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::evaluate::auroc;
use crate::math::{mean, sample_sd};
use crate::models::artifact::{ModelArtifact, ModelParams};
use crate::models::forest::{ForestParams, MaxFeatures};
use crate::models::gbdt::{GbdtParams, GrowthPolicy};
use crate::models::knn::{KnnParams, Metric, Weighting};
use crate::models::logreg::{LogRegParams, Penalty};
use crate::models::mlp::MlpParams;
use crate::models::nb::NbParams;
use crate::par::Executor;
use crate::preprocess::FeatureMatrix;
use crate::resample::{fold_smote_params, smote_oversample, FoldPlan, SmoteParams};
use crate::rng;
use crate::{Error, Result};

/// Index tuples of a Cartesian product; the last axis varies fastest.
fn product(lens: &[usize]) -> Vec<Vec<usize>> {
    if lens.contains(&0) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; lens.len()];
    loop {
        out.push(idx.clone());
        let mut k = lens.len();
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < lens[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbdtGrid {
    pub growth: GrowthPolicy,
    pub eta: Vec<f64>,
    pub n_rounds: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub min_child_weight: Vec<f64>,
    pub subsample: Vec<f64>,
    pub colsample_bytree: Vec<f64>,
    pub reg_alpha: Vec<f64>,
    pub reg_lambda: Vec<f64>,
    pub max_leaves: Vec<usize>,
}

impl GbdtGrid {
    pub fn depthwise_default() -> Self {
        Self {
            growth: GrowthPolicy::Depthwise,
            eta: vec![0.05, 0.1],
            n_rounds: vec![200],
            max_depth: vec![3, 4],
            min_child_weight: vec![1.0],
            subsample: vec![0.8],
            colsample_bytree: vec![0.8],
            reg_alpha: vec![0.0],
            reg_lambda: vec![1.0],
            max_leaves: vec![31],
        }
    }

    pub fn leafwise_default() -> Self {
        Self { growth: GrowthPolicy::Leafwise, max_depth: vec![8], max_leaves: vec![8, 15], ..Self::depthwise_default() }
    }

    fn candidates(&self) -> Vec<ModelParams> {
        let lens = [
            self.eta.len(),
            self.n_rounds.len(),
            self.max_depth.len(),
            self.min_child_weight.len(),
            self.subsample.len(),
            self.colsample_bytree.len(),
            self.reg_alpha.len(),
            self.reg_lambda.len(),
            self.max_leaves.len(),
        ];
        product(&lens)
            .into_iter()
            .map(|i| {
                ModelParams::Gbdt(GbdtParams {
                    eta: self.eta[i[0]],
                    n_rounds: self.n_rounds[i[1]],
                    max_depth: self.max_depth[i[2]],
                    min_child_weight: self.min_child_weight[i[3]],
                    subsample: self.subsample[i[4]],
                    colsample_bytree: self.colsample_bytree[i[5]],
                    reg_alpha: self.reg_alpha[i[6]],
                    reg_lambda: self.reg_lambda[i[7]],
                    growth: self.growth,
                    max_leaves: self.max_leaves[i[8]],
                    seed: 0,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestGrid {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    pub min_samples_leaf: Vec<usize>,
    pub max_features: Vec<MaxFeatures>,
}

impl Default for ForestGrid {
    fn default() -> Self {
        Self { n_estimators: vec![200], max_depth: vec![Some(6), None], min_samples_leaf: vec![2], max_features: vec![MaxFeatures::Sqrt] }
    }
}

impl ForestGrid {
    fn candidates(&self) -> Vec<ModelParams> {
        product(&[self.n_estimators.len(), self.max_depth.len(), self.min_samples_leaf.len(), self.max_features.len()])
            .into_iter()
            .map(|i| {
                ModelParams::RandomForest(ForestParams {
                    n_estimators: self.n_estimators[i[0]],
                    max_depth: self.max_depth[i[1]],
                    min_samples_leaf: self.min_samples_leaf[i[2]],
                    max_features: self.max_features[i[3]],
                    bootstrap: true,
                    seed: 0,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRegGrid {
    pub penalty: Vec<Penalty>,
    pub c: Vec<f64>,
}

impl Default for LogRegGrid {
    fn default() -> Self {
        Self { penalty: vec![Penalty::L1, Penalty::L2], c: vec![0.1, 1.0, 10.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnGrid {
    pub k: Vec<usize>,
    pub metric: Vec<Metric>,
    pub weights: Vec<Weighting>,
}

impl Default for KnnGrid {
    fn default() -> Self {
        Self { k: vec![5, 15, 31], metric: vec![Metric::Euclidean, Metric::Manhattan], weights: vec![Weighting::Uniform, Weighting::Distance] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NbGrid {
    pub positive_prior: Vec<Option<f64>>,
}

impl Default for NbGrid {
    fn default() -> Self {
        Self { positive_prior: vec![None, Some(0.5)] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpGrid {
    pub hidden: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub batch_size: Vec<usize>,
    pub epochs: Vec<usize>,
    pub alpha: Vec<f64>,
}

impl Default for MlpGrid {
    fn default() -> Self {
        Self { hidden: vec![8, 32], learning_rate: vec![1e-3, 1e-2], batch_size: vec![32], epochs: vec![100], alpha: vec![1e-4] }
    }
}

/// Candidate values per hyperparameter for one model kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    Gbdt(GbdtGrid),
    RandomForest(ForestGrid),
    Logreg(LogRegGrid),
    Knn(KnnGrid),
    GaussianNb(NbGrid),
    Mlp(MlpGrid),
}

impl GridSpec {
    /// Cartesian product in declaration order, last field fastest.
    pub fn candidates(&self) -> Vec<ModelParams> {
        match self {
            GridSpec::Gbdt(g) => g.candidates(),
            GridSpec::RandomForest(g) => g.candidates(),
            GridSpec::Logreg(g) => product(&[g.penalty.len(), g.c.len()])
                .into_iter()
                .map(|i| ModelParams::Logreg(LogRegParams { penalty: g.penalty[i[0]], c: g.c[i[1]], ..Default::default() }))
                .collect(),
            GridSpec::Knn(g) => product(&[g.k.len(), g.metric.len(), g.weights.len()])
                .into_iter()
                .map(|i| ModelParams::Knn(KnnParams { k: g.k[i[0]], metric: g.metric[i[1]], weights: g.weights[i[2]] }))
                .collect(),
            GridSpec::GaussianNb(g) => g
                .positive_prior
                .iter()
                .map(|&p| ModelParams::GaussianNb(NbParams { positive_prior: p, ..Default::default() }))
                .collect(),
            GridSpec::Mlp(g) => product(&[g.hidden.len(), g.learning_rate.len(), g.batch_size.len(), g.epochs.len(), g.alpha.len()])
                .into_iter()
                .map(|i| {
                    ModelParams::Mlp(MlpParams {
                        hidden: g.hidden[i[0]],
                        learning_rate: g.learning_rate[i[1]],
                        batch_size: g.batch_size[i[2]],
                        epochs: g.epochs[i[3]],
                        alpha: g.alpha[i[4]],
                        seed: 0,
                    })
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub candidate: usize,
    pub params: ModelParams,
    pub fold_auroc: Vec<f64>,
    pub mean_auroc: Option<f64>,
    pub sd_auroc: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best_index: usize,
    pub best_params: ModelParams,
    /// Always `first_in_grid_order`: equal mean AUROCs keep the earlier candidate.
    pub tie_break: String,
    pub cv_table: Vec<CvRow>,
}

/// Seed of the model fitted for `(candidate, fold)`.
pub fn cell_seed(seed: u64, candidate: usize, fold: usize) -> u64 {
    rng::derive_seed(seed, "grid-fit", &[candidate as u64, fold as u64])
}

/// Grid search with the default learner (`ModelParams::fit`).
pub fn grid_search<E: Executor>(
    grid: &GridSpec,
    train: &FeatureMatrix,
    folds: &FoldPlan,
    smote: &SmoteParams,
    seed: u64,
    exec: &E,
) -> Result<GridResult> {
    grid_search_with(grid, train, folds, smote, seed, exec, &|p: &ModelParams, m: &FeatureMatrix| p.fit(m))
}

/// Grid search with an injectable fit function. Each fold's training rows
/// are oversampled once and shared by all candidates; validation rows are
/// only ever passed to `predict_proba`.
pub fn grid_search_with<E, F>(
    grid: &GridSpec,
    train: &FeatureMatrix,
    folds: &FoldPlan,
    smote: &SmoteParams,
    seed: u64,
    exec: &E,
    fit: &F,
) -> Result<GridResult>
where
    E: Executor,
    F: Fn(&ModelParams, &FeatureMatrix) -> Result<ModelArtifact> + Sync,
{
    let candidates = grid.candidates();
    if candidates.is_empty() {
        return Err(Error::InvalidParam("grid has no candidates".into()));
    }
    let k = folds.folds.len();
    let fold_data: Vec<Result<(FeatureMatrix, FeatureMatrix)>> = exec.map(k, |f| {
        let fold = &folds.folds[f];
        let fold_train = train.take_rows(&fold.train);
        let smoted = smote_oversample(&fold_train, &fold_smote_params(smote, seed, f))?;
        Ok((smoted.matrix, train.take_rows(&fold.val)))
    });
    let fold_data: Vec<(FeatureMatrix, FeatureMatrix)> = fold_data.into_iter().collect::<Result<_>>()?;
    let cells: Vec<Result<f64>> = exec.map(candidates.len() * k, |cell| {
        let (c, f) = (cell / k, cell % k);
        let (fit_m, val) = &fold_data[f];
        let model = fit(&candidates[c].with_seed(cell_seed(seed, c, f)), fit_m)?;
        let scores = model.predict_proba(val)?;
        auroc(&scores, val.labels())
    });
    let mut table = Vec::with_capacity(candidates.len());
    for (c, params) in candidates.into_iter().enumerate() {
        let mut aucs = Vec::with_capacity(k);
        let mut error = None;
        for cell in &cells[c * k..(c + 1) * k] {
            match cell {
                Ok(a) => aucs.push(*a),
                Err(e) => {
                    error.get_or_insert_with(|| e.to_string());
                }
            }
        }
        let ok = error.is_none();
        table.push(CvRow {
            candidate: c,
            params,
            mean_auroc: ok.then(|| mean(&aucs)),
            sd_auroc: ok.then(|| sample_sd(&aucs)),
            fold_auroc: aucs,
            error,
        });
    }
    let mut best: Option<usize> = None;
    for row in &table {
        if let Some(m) = row.mean_auroc {
            if best.is_none_or(|b| m > table[b].mean_auroc.unwrap_or(f64::NEG_INFINITY)) {
                best = Some(row.candidate);
            }
        }
    }
    let Some(best) = best else {
        return Err(Error::AllCandidatesFailed(
            table.iter().map(|r| format!("candidate {}: {}", r.candidate, r.error.as_deref().unwrap_or("unknown"))).collect(),
        ));
    };
    Ok(GridResult { best_index: best, best_params: table[best].params.clone(), tie_break: "first_in_grid_order".into(), cv_table: table })
}
