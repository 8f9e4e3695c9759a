//! Hybrid feature selection: random-forest RFECV intersected with the LASSO
//! support, plus forced inclusions and exclusions.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::evaluate::auroc;
use crate::math::{exp, log, mean, soft_threshold};
use crate::models::forest::{train_random_forest, ForestParams, MaxFeatures};
use crate::models::tree::{TreeEnsemble, TreeNode};
use crate::par::Executor;
use crate::preprocess::FeatureMatrix;
use crate::resample::FoldPlan;
use crate::rng;
use crate::{Error, Result};

/// Mean decrease in Gini impurity: per tree, the sum over split nodes of
/// `p(t) * delta_i(t)` with `p(t) = cover(t) / cover(root)`, averaged over
/// trees and normalized to sum 1 when any split exists.
pub fn gini_importance(forest: &TreeEnsemble) -> Result<Vec<f64>> {
    if forest.trees.is_empty() {
        return Err(Error::Untrained);
    }
    let mut imp = vec![0.0; forest.n_features];
    for tree in &forest.trees {
        let root = tree.nodes[0].cover();
        for node in &tree.nodes {
            if let TreeNode::Split { feature, cover, gain, .. } = *node {
                imp[feature] += cover / root * gain;
            }
        }
    }
    let t = forest.trees.len() as f64;
    imp.iter_mut().for_each(|v| *v /= t);
    let total: f64 = imp.iter().sum();
    if total > 0.0 {
        imp.iter_mut().for_each(|v| *v /= total);
    }
    Ok(imp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RfecvConfig {
    pub forest: ForestParams,
}

impl Default for RfecvConfig {
    fn default() -> Self {
        Self {
            forest: ForestParams {
                n_estimators: 100,
                max_depth: Some(8),
                min_samples_leaf: 3,
                max_features: MaxFeatures::Sqrt,
                bootstrap: true,
                seed: 0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub feature_count: usize,
    pub mean_auroc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfecvResult {
    /// One point per feature count, from `p` down to 1.
    pub curve: Vec<CurvePoint>,
    /// Features dropped, in elimination order.
    pub eliminated: Vec<String>,
    pub selected: Vec<String>,
}

/// Recursive elimination of the feature with the lowest fold-averaged Gini
/// importance, one at a time. Returns the subset whose size maximizes mean
/// CV AUROC (ties go to the smaller subset).
pub fn rfecv<E: Executor>(train: &FeatureMatrix, folds: &FoldPlan, config: &RfecvConfig, seed: u64, exec: &E) -> Result<RfecvResult> {
    let p = train.n_features();
    if p == 0 {
        return Err(Error::InvalidParam("no features to select from".into()));
    }
    let names = train.feature_names();
    let fold_data: Vec<(FeatureMatrix, FeatureMatrix)> =
        folds.folds.iter().map(|f| (train.take_rows(&f.train), train.take_rows(&f.val))).collect();
    let mut current: Vec<usize> = (0..p).collect();
    let mut curve = Vec::with_capacity(p);
    let mut subsets = Vec::with_capacity(p);
    let mut eliminated = Vec::new();
    let mut step = 0u64;
    loop {
        let results: Vec<Result<(f64, Vec<f64>)>> = exec.map(fold_data.len(), |f| {
            let (tr, va) = &fold_data[f];
            let (tr, va) = (tr.take_columns(&current), va.take_columns(&current));
            let params = ForestParams { seed: rng::derive_seed(seed, "rfecv", &[step, f as u64]), ..config.forest.clone() };
            let fit = train_random_forest(&tr, &params)?;
            let scores: Vec<f64> = (0..va.n_rows()).map(|i| fit.ensemble.probability(va.row(i), va.row_mask(i))).collect();
            Ok((auroc(&scores, va.labels())?, gini_importance(&fit.ensemble)?))
        });
        let results: Vec<(f64, Vec<f64>)> = results.into_iter().collect::<Result<_>>()?;
        let aucs: Vec<f64> = results.iter().map(|r| r.0).collect();
        curve.push(CurvePoint { feature_count: current.len(), mean_auroc: mean(&aucs) });
        subsets.push(current.clone());
        if current.len() == 1 {
            break;
        }
        let k = results.len() as f64;
        let avg: Vec<f64> = (0..current.len()).map(|j| results.iter().map(|r| r.1[j]).sum::<f64>() / k).collect();
        let mut worst = 0;
        for j in 1..avg.len() {
            if avg[j] < avg[worst] {
                worst = j;
            }
        }
        eliminated.push(names[current[worst]].clone());
        current.remove(worst);
        step += 1;
    }
    // curve runs from large to small subsets, so `>=` lets smaller sizes win ties
    let mut best = 0;
    for i in 1..curve.len() {
        if curve[i].mean_auroc >= curve[best].mean_auroc {
            best = i;
        }
    }
    let selected = subsets[best].iter().map(|&j| names[j].clone()).collect();
    Ok(RfecvResult { curve, eliminated, selected })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    /// Objective `sum (y - b0 - X b)^2 + lambda ||b||_1` after each sweep.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

pub const LASSO_TOL: f64 = 1e-8;
pub const LASSO_MAX_SWEEPS: usize = 10_000;

/// Column-major design with centred columns and targets. With centred data
/// the optimal intercept is `ybar - sum_j mean_j b_j` for any `b`, so only the
/// slopes are iterated.
struct Design {
    cols: Vec<Vec<f64>>,
    means: Vec<f64>,
    y: Vec<f64>,
    ybar: f64,
}

impl Design {
    fn new(m: &FeatureMatrix) -> Result<Self> {
        let (n, p) = (m.n_rows(), m.n_features());
        let cols = (0..p).map(|j| (0..n).map(|i| m.value(i, j)).collect()).collect();
        let y = m.labels().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Self::from_cols(cols, y)
    }

    fn from_cols(mut cols: Vec<Vec<f64>>, mut y: Vec<f64>) -> Result<Self> {
        if cols.iter().flatten().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let n = y.len() as f64;
        let centre = |v: &mut Vec<f64>| {
            let mean = v.iter().sum::<f64>() / n;
            v.iter_mut().for_each(|x| *x -= mean);
            mean
        };
        let means = cols.iter_mut().map(centre).collect();
        let ybar = centre(&mut y);
        Ok(Self { cols, means, y, ybar })
    }

    fn intercept(&self, coef: &[f64]) -> f64 {
        self.ybar - self.means.iter().zip(coef).map(|(m, b)| m * b).sum::<f64>()
    }

    fn objective(&self, coef: &[f64], lambda: f64) -> f64 {
        let mut rss = 0.0;
        for i in 0..self.y.len() {
            let f = self.cols.iter().zip(coef).map(|(c, b)| c[i] * b).sum::<f64>();
            rss += (self.y[i] - f) * (self.y[i] - f);
        }
        rss + lambda * coef.iter().map(|b| b.abs()).sum::<f64>()
    }

    fn fit(&self, lambda: f64, mut coef: Vec<f64>) -> LassoModel {
        let n = self.y.len();
        let z: Vec<f64> = self.cols.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
        let mut r: Vec<f64> = (0..n).map(|i| self.y[i] - self.cols.iter().zip(&coef).map(|(c, b)| c[i] * b).sum::<f64>()).collect();
        let mut trace = Vec::new();
        let mut converged = false;
        for _ in 0..LASSO_MAX_SWEEPS {
            let mut change = 0.0f64;
            for (j, col) in self.cols.iter().enumerate() {
                let old = coef[j];
                let rho: f64 = col.iter().zip(&r).map(|(x, ri)| x * (ri + x * old)).sum();
                let new = if z[j] > 0.0 { soft_threshold(rho, lambda / 2.0) / z[j] } else { 0.0 };
                if new != old {
                    let d = new - old;
                    for (ri, x) in r.iter_mut().zip(col) {
                        *ri -= x * d;
                    }
                    coef[j] = new;
                    change = change.max(d.abs());
                }
            }
            trace.push(self.objective(&coef, lambda));
            if change < LASSO_TOL {
                converged = true;
                break;
            }
        }
        LassoModel { intercept: self.intercept(&coef), coef, lambda, objective_trace: trace, converged }
    }
}

/// Cyclic coordinate descent on `sum (y - b0 - X b)^2 + lambda ||b||_1` with
/// an unpenalized intercept, starting from zero.
pub fn lasso_fit(train: &FeatureMatrix, lambda: f64) -> Result<LassoModel> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParam("lambda must be >= 0".into()));
    }
    let d = Design::new(train)?;
    Ok(d.fit(lambda, vec![0.0; train.n_features()]))
}

/// [`lasso_fit`] on a row-major design and real-valued targets.
pub fn lasso_fit_xy(rows: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<LassoModel> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParam("lambda must be >= 0".into()));
    }
    if rows.len() != y.len() || rows.is_empty() {
        return Err(Error::LengthMismatch(y.len(), rows.len()));
    }
    let p = rows[0].len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidParam("ragged design matrix".into()));
    }
    let cols = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    Ok(Design::from_cols(cols, y.to_vec())?.fit(lambda, vec![0.0; p]))
}

/// Warm-started path over a descending grid.
pub fn lasso_path(train: &FeatureMatrix, grid: &[f64]) -> Result<Vec<LassoModel>> {
    check_grid(grid)?;
    let d = Design::new(train)?;
    let mut coef = vec![0.0; train.n_features()];
    let mut out = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let m = d.fit(lambda, coef);
        coef = m.coef.clone();
        out.push(m);
    }
    Ok(out)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParam("lambda grid is empty".into()));
    }
    if grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) || grid.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidParam("lambda grid must be finite, >= 0 and sorted descending".into()));
    }
    Ok(())
}

/// `count` log-spaced values from `lambda_max = max_j |sum_i x_ij (y_i - ybar)|`
/// down to `lambda_max * ratio`.
pub fn default_lambda_grid(train: &FeatureMatrix, count: usize, ratio: f64) -> Vec<f64> {
    let n = train.n_rows();
    let ybar = train.positives() as f64 / n as f64;
    let lmax = (0..train.n_features())
        .map(|j| (0..n).map(|i| train.value(i, j) * (if train.labels()[i] { 1.0 } else { 0.0 } - ybar)).sum::<f64>().abs())
        .fold(0.0, f64::max);
    if count <= 1 || lmax == 0.0 {
        return vec![lmax];
    }
    let (hi, lo) = (log(lmax), log(lmax * ratio));
    (0..count).map(|k| exp(hi + (lo - hi) * k as f64 / (count - 1) as f64)).collect()
}

pub const SUPPORT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoCvPoint {
    pub lambda: f64,
    pub mean_auroc: f64,
    pub nonzero: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoSelection {
    pub lambda: f64,
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub cv: Vec<LassoCvPoint>,
    pub selected: Vec<String>,
}

/// Pick the lambda with the best mean CV AUROC of the linear score (ties go
/// to the larger lambda), refit on all training rows and keep features with
/// `|b| > 1e-12`.
pub fn lasso_select<E: Executor>(train: &FeatureMatrix, folds: &FoldPlan, grid: &[f64], exec: &E) -> Result<LassoSelection> {
    check_grid(grid)?;
    let per_fold: Vec<Result<Vec<f64>>> = exec.map(folds.folds.len(), |f| {
        let fold = &folds.folds[f];
        let (tr, va) = (train.take_rows(&fold.train), train.take_rows(&fold.val));
        lasso_path(&tr, grid)?
            .iter()
            .map(|m| {
                let s: Vec<f64> =
                    (0..va.n_rows()).map(|i| m.intercept + va.row(i).iter().zip(&m.coef).map(|(x, b)| x * b).sum::<f64>()).collect();
                auroc(&s, va.labels())
            })
            .collect()
    });
    let per_fold: Vec<Vec<f64>> = per_fold.into_iter().collect::<Result<_>>()?;
    let full = lasso_path(train, grid)?;
    let nonzero = |m: &LassoModel| m.coef.iter().filter(|b| b.abs() > SUPPORT_EPS).count();
    let cv: Vec<LassoCvPoint> = grid
        .iter()
        .enumerate()
        .map(|(k, &lambda)| LassoCvPoint {
            lambda,
            mean_auroc: mean(&per_fold.iter().map(|f| f[k]).collect::<Vec<_>>()),
            nonzero: nonzero(&full[k]),
        })
        .collect();
    let mut best: Option<usize> = None;
    for (k, point) in cv.iter().enumerate() {
        if point.nonzero > 0 && best.is_none_or(|b| point.mean_auroc > cv[b].mean_auroc) {
            best = Some(k);
        }
    }
    let best = best.ok_or(Error::GridTooStrong)?;
    let m = &full[best];
    let selected =
        train.feature_names().iter().zip(&m.coef).filter(|(_, b)| b.abs() > SUPPORT_EPS).map(|(n, _)| n.clone()).collect();
    Ok(LassoSelection { lambda: m.lambda, coef: m.coef.clone(), intercept: m.intercept, cv, selected })
}

/// `((rfecv ∩ lasso) ∪ forced_in) \ forced_out`, listed in schema order.
pub fn combine_sets(schema: &[String], rfecv: &[String], lasso: &[String], forced_in: &[String], forced_out: &[String]) -> Result<Vec<String>> {
    for name in rfecv.iter().chain(lasso).chain(forced_in).chain(forced_out) {
        if !schema.contains(name) {
            return Err(Error::UnknownColumn(name.clone()));
        }
    }
    let r: BTreeSet<&String> = rfecv.iter().collect();
    let l: BTreeSet<&String> = lasso.iter().collect();
    let fin: BTreeSet<&String> = forced_in.iter().collect();
    let fout: BTreeSet<&String> = forced_out.iter().collect();
    let out: Vec<String> =
        schema.iter().filter(|n| ((r.contains(n) && l.contains(n)) || fin.contains(n)) && !fout.contains(n)).cloned().collect();
    if out.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub rfecv_curve: Vec<CurvePoint>,
    pub rfecv_eliminated: Vec<String>,
    pub rfecv_set: Vec<String>,
    pub lasso_lambda: f64,
    pub lasso_cv: Vec<LassoCvPoint>,
    pub lasso_coefficients: Vec<(String, f64)>,
    pub lasso_set: Vec<String>,
    pub forced_in: Vec<String>,
    pub forced_out: Vec<String>,
    pub final_set: Vec<String>,
}

pub fn hybrid_select(
    schema: &[String],
    rfecv: &RfecvResult,
    lasso: &LassoSelection,
    forced_in: &[String],
    forced_out: &[String],
) -> Result<SelectionReport> {
    let final_set = combine_sets(schema, &rfecv.selected, &lasso.selected, forced_in, forced_out)?;
    Ok(SelectionReport {
        rfecv_curve: rfecv.curve.clone(),
        rfecv_eliminated: rfecv.eliminated.clone(),
        rfecv_set: rfecv.selected.clone(),
        lasso_lambda: lasso.lambda,
        lasso_cv: lasso.cv.clone(),
        lasso_coefficients: schema.iter().cloned().zip(lasso.coef.iter().copied()).collect(),
        lasso_set: lasso.selected.clone(),
        forced_in: forced_in.to_vec(),
        forced_out: forced_out.to_vec(),
        final_set,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    pub rfecv: RfecvConfig,
    /// Explicit descending lambda grid; `None` derives the default grid.
    pub lambda_grid: Option<Vec<f64>>,
    pub lambda_count: usize,
    pub lambda_ratio: f64,
    pub forced_in: Vec<String>,
    pub forced_out: Vec<String>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { rfecv: RfecvConfig::default(), lambda_grid: None, lambda_count: 50, lambda_ratio: 1e-4, forced_in: Vec::new(), forced_out: Vec::new() }
    }
}

/// Run RFECV and LASSO on the same folds and combine them.
pub fn select_features<E: Executor>(train: &FeatureMatrix, folds: &FoldPlan, config: &SelectionConfig, seed: u64, exec: &E) -> Result<SelectionReport> {
    let r = rfecv(train, folds, &config.rfecv, seed, exec)?;
    let grid = match &config.lambda_grid {
        Some(g) => g.clone(),
        None => default_lambda_grid(train, config.lambda_count, config.lambda_ratio),
    };
    let l = lasso_select(train, folds, &grid, exec)?;
    hybrid_select(train.feature_names(), &r, &l, &config.forced_in, &config.forced_out)
}
