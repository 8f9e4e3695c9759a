//! The end-to-end readmission pipeline as a sequence of stages: prepare,
//! select, train, evaluate, explain, ablate, plus the cohort statistics.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::cohort::{apply_exclusions, Cell, Cohort, ColumnKind, ExclusionLog};
use crate::evaluate::{calibration, metrics_report, pick_threshold, roc_points, CalibrationBin, MetricsReport, RocPoint, ThresholdPolicy};
use crate::explain::ablation::{ablation_study, AblationResult};
use crate::explain::shap::{mean_abs_shap, shap_summary_rows, tree_shap, ShapAttribution, ShapSummaryRow};
use crate::explain::stats::{compare_categorical, compare_numeric, sort_by_p_descending, ComparisonRow};
use crate::models::artifact::{ModelArtifact, ModelParams};
use crate::models::grid::{
    grid_search, ForestGrid, GbdtGrid, GridResult, GridSpec, KnnGrid, LogRegGrid, MlpGrid, NbGrid,
};
use crate::par::Executor;
use crate::preprocess::{stratified_split, FeatureMatrix, Preprocessor, SplitIndex};
use crate::resample::{make_folds, smote_oversample, FoldPlan, SmoteParams};
use crate::select::{select_features, SelectionConfig, SelectionReport};
use crate::{rng, Error, Result};

/// A named model family and its hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub name: String,
    pub grid: GridSpec,
}

pub fn default_models() -> Vec<ModelEntry> {
    let entry = |name: &str, grid| ModelEntry { name: name.to_string(), grid };
    alloc::vec![
        entry("gbdt_depthwise", GridSpec::Gbdt(GbdtGrid::depthwise_default())),
        entry("gbdt_leafwise", GridSpec::Gbdt(GbdtGrid::leafwise_default())),
        entry("random_forest", GridSpec::RandomForest(ForestGrid::default())),
        entry("logreg", GridSpec::Logreg(LogRegGrid::default())),
        entry("knn", GridSpec::Knn(KnnGrid::default())),
        entry("gaussian_nb", GridSpec::GaussianNb(NbGrid::default())),
        entry("mlp", GridSpec::Mlp(MlpGrid::default())),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationConfig {
    pub enabled: bool,
    pub repeats: usize,
    /// Name of the model entry whose tuned parameters are refitted.
    pub model: String,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self { enabled: true, repeats: 10, model: "gbdt_depthwise".to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub test_fraction: f64,
    pub folds: usize,
    pub smote: SmoteParams,
    pub selection: SelectionConfig,
    pub models: Vec<ModelEntry>,
    /// Threshold rule; Youden thresholds are chosen on training predictions.
    pub threshold: ThresholdPolicy,
    pub bootstrap: usize,
    /// Tree model explained with SHAP; `None` skips the stage.
    pub explain_model: Option<String>,
    pub ablation: AblationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.3,
            folds: 5,
            smote: SmoteParams::default(),
            selection: SelectionConfig::default(),
            models: default_models(),
            threshold: ThresholdPolicy::Fixed,
            bootstrap: 2000,
            explain_model: Some("gbdt_depthwise".to_string()),
            ablation: AblationConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidParam(format!("test_fraction {} outside (0, 1)", self.test_fraction)));
        }
        if self.folds < 2 {
            return Err(Error::InvalidParam("folds must be >= 2".into()));
        }
        if self.bootstrap == 0 {
            return Err(Error::InvalidParam("bootstrap must be >= 1".into()));
        }
        if self.models.is_empty() {
            return Err(Error::InvalidParam("at least one model is required".into()));
        }
        for (i, m) in self.models.iter().enumerate() {
            if m.name.is_empty() || !m.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(Error::InvalidParam(format!("model name `{}` must be non-empty [A-Za-z0-9_-]", m.name)));
            }
            if self.models[..i].iter().any(|o| o.name == m.name) {
                return Err(Error::InvalidParam(format!("duplicate model name `{}`", m.name)));
            }
            if m.grid.candidates().is_empty() {
                return Err(Error::InvalidParam(format!("model `{}` has an empty grid", m.name)));
            }
        }
        if let Some(name) = &self.explain_model {
            let m = self.model(name).ok_or_else(|| Error::InvalidParam(format!("explain_model `{name}` is not a configured model")))?;
            if !matches!(m.grid, GridSpec::Gbdt(_) | GridSpec::RandomForest(_)) {
                return Err(Error::InvalidParam(format!("explain_model `{name}` is not a tree ensemble")));
            }
        }
        if self.ablation.enabled {
            if self.model(&self.ablation.model).is_none() {
                return Err(Error::InvalidParam(format!("ablation model `{}` is not a configured model", self.ablation.model)));
            }
            if self.ablation.repeats == 0 {
                return Err(Error::InvalidParam("ablation repeats must be >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn model(&self, name: &str) -> Option<&ModelEntry> {
        self.models.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Prepare,
    Select,
    Train,
    Evaluate,
    Explain,
    Ablate,
    Stats,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Prepare => "prepare",
            Stage::Select => "select",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Explain => "explain",
            Stage::Ablate => "ablate",
            Stage::Stats => "stats",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{stage} stage failed: {error}")]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
}

trait InStage<T> {
    fn stage(self, stage: Stage) -> core::result::Result<T, StageError>;
}

impl<T> InStage<T> for Result<T> {
    fn stage(self, stage: Stage) -> core::result::Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

/// Cohort after exclusions, split, fitted transforms and the CV fold plan.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub exclusion_log: ExclusionLog,
    pub cohort: Cohort,
    pub split: SplitIndex,
    pub preprocessor: Preprocessor,
    /// Imputed and scaled matrices over all cohort features.
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
    pub folds: FoldPlan,
}

pub fn prepare(cohort: &Cohort, config: &PipelineConfig, seed: u64) -> Result<Prepared> {
    let (cohort, exclusion_log) = apply_exclusions(cohort);
    let split = stratified_split(&cohort.labels(), config.test_fraction, seed)?;
    prepare_split(cohort, exclusion_log, split, config, seed)
}

/// Preprocess a cohort whose exclusions and split are already fixed.
pub fn prepare_split(cohort: Cohort, exclusion_log: ExclusionLog, split: SplitIndex, config: &PipelineConfig, seed: u64) -> Result<Prepared> {
    let (preprocessor, train_raw) = Preprocessor::fit(&cohort, &split.train_rows)?;
    let train = preprocessor.finish(&train_raw)?;
    let test = preprocessor.finish(&preprocessor.raw(&cohort, &split.test_rows)?)?;
    let folds = make_folds(train.labels(), config.folds, seed)?;
    Ok(Prepared { exclusion_log, cohort, split, preprocessor, train, test, folds })
}

pub fn selection_seed(seed: u64) -> u64 {
    rng::derive_seed(seed, "selection", &[])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub name: String,
    pub grid: GridResult,
    pub artifact: ModelArtifact,
}

/// SMOTE parameters for refitting on the whole training set.
pub fn final_smote(config: &PipelineConfig, seed: u64) -> SmoteParams {
    SmoteParams { seed: rng::derive_seed(seed, "smote-final", &[]), ..config.smote }
}

pub fn final_fit_seed(seed: u64, model: &str) -> u64 {
    rng::derive_seed(seed, "final-fit", &[]) ^ rng::derive_seed(0, model, &[])
}

/// Grid-search one model entry on the selected training matrix and refit the
/// best candidate on the oversampled training set.
pub fn train_model<E: Executor>(
    entry: &ModelEntry,
    train: &FeatureMatrix,
    folds: &FoldPlan,
    config: &PipelineConfig,
    seed: u64,
    exec: &E,
) -> Result<TrainedModel> {
    let grid = grid_search(&entry.grid, train, folds, &config.smote, seed, exec)?;
    let smoted = smote_oversample(train, &final_smote(config, seed))?;
    let artifact = grid.best_params.with_seed(final_fit_seed(seed, &entry.name)).fit(&smoted.matrix)?;
    Ok(TrainedModel { name: entry.name.clone(), grid, artifact })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub model: String,
    pub train: MetricsReport,
    pub test: MetricsReport,
    pub roc: Vec<RocPoint>,
    pub calibration: Vec<CalibrationBin>,
}

pub fn evaluate_model<E: Executor>(
    name: &str,
    artifact: &ModelArtifact,
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    config: &PipelineConfig,
    seed: u64,
    exec: &E,
) -> Result<Evaluation> {
    let train_scores = artifact.predict_proba(train)?;
    let test_scores = artifact.predict_proba(test)?;
    let threshold = pick_threshold(&train_scores, train.labels(), config.threshold)?;
    let boot_seed = |side: u64| rng::derive_seed(seed, "evaluate", &[side]) ^ rng::derive_seed(0, name, &[]);
    let report = |scores: &[f64], labels: &[bool], side| metrics_report(scores, labels, threshold, config.threshold, config.bootstrap, boot_seed(side), exec);
    Ok(Evaluation {
        model: name.to_string(),
        train: report(&train_scores, train.labels(), 0)?,
        test: report(&test_scores, test.labels(), 1)?,
        roc: roc_points(&test_scores, test.labels())?,
        calibration: calibration(&test_scores, test.labels())?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapReport {
    pub model: String,
    /// Attributions are in margin (log-odds for boosted models) space.
    pub space: String,
    pub background: String,
    pub base_value: f64,
    pub instance_ids: Vec<String>,
    pub attributions: Vec<ShapAttribution>,
    pub mean_abs: Vec<(String, f64)>,
    pub summary: Vec<ShapSummaryRow>,
}

/// Tree SHAP for every row of `rows`.
pub fn explain_model<E: Executor>(name: &str, artifact: &ModelArtifact, rows: &FeatureMatrix, exec: &E) -> Result<ShapReport> {
    artifact.check_schema(rows.feature_names())?;
    let ensemble = artifact.ensemble().ok_or_else(|| Error::InvalidParam(format!("model `{name}` is not a tree ensemble")))?;
    if rows.n_rows() == 0 {
        return Err(Error::InvalidParam("no rows to explain".into()));
    }
    let attributions: Vec<ShapAttribution> =
        exec.map(rows.n_rows(), |i| tree_shap(ensemble, rows.row(i), rows.row_mask(i))).into_iter().collect::<Result<_>>()?;
    let names = rows.feature_names();
    let values: Vec<Vec<f64>> = (0..rows.n_rows()).map(|i| rows.row(i).to_vec()).collect();
    Ok(ShapReport {
        model: name.to_string(),
        space: "margin".to_string(),
        background: "cover_weighted".to_string(),
        base_value: ensemble.expected_margin(),
        instance_ids: rows.row_ids().to_vec(),
        mean_abs: mean_abs_shap(names, &attributions),
        summary: shap_summary_rows(names, rows.row_ids(), &values, &attributions),
        attributions,
    })
}

pub fn ablation_seed(seed: u64) -> u64 {
    rng::derive_seed(seed, "ablation", &[])
}

/// Per-feature comparisons between the rows where `group` is false (first
/// group) and true (second group), on raw observed values.
pub fn compare_groups(cohort: &Cohort, rows: &[usize], group: &[bool]) -> Vec<ComparisonRow> {
    let names = cohort.feature_names();
    let mut out: Vec<ComparisonRow> = (0..cohort.n_features())
        .map(|j| match cohort.feature_kind(j) {
            ColumnKind::Numeric => {
                let mut g: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
                for (&r, &in2) in rows.iter().zip(group) {
                    if let Cell::Number(v) = cohort.cell(r, j) {
                        g[usize::from(in2)].push(v);
                    }
                }
                compare_numeric(&names[j], &g[0], &g[1])
            }
            ColumnKind::Categorical => {
                let mut g: [Vec<&str>; 2] = [Vec::new(), Vec::new()];
                for (&r, &in2) in rows.iter().zip(group) {
                    if let Cell::Category(v) = cohort.cell(r, j) {
                        g[usize::from(in2)].push(v);
                    }
                }
                compare_categorical(&names[j], &g[0], &g[1])
            }
        })
        .collect();
    sort_by_p_descending(&mut out);
    out
}

/// Training vs test comparison (first group = training rows).
pub fn split_statistics(cohort: &Cohort, split: &SplitIndex) -> Vec<ComparisonRow> {
    let mut rows: Vec<usize> = split.train_rows.clone();
    rows.extend_from_slice(&split.test_rows);
    let group: Vec<bool> = (0..rows.len()).map(|i| i >= split.train_rows.len()).collect();
    compare_groups(cohort, &rows, &group)
}

/// Non-readmitted vs readmitted comparison (first group = non-readmitted).
pub fn outcome_statistics(cohort: &Cohort) -> Vec<ComparisonRow> {
    let rows: Vec<usize> = (0..cohort.len()).collect();
    compare_groups(cohort, &rows, &cohort.labels())
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub prepared: Prepared,
    pub selection: SelectionReport,
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
    pub models: Vec<TrainedModel>,
    pub evaluations: Vec<Evaluation>,
    pub shap: Option<ShapReport>,
    pub ablation: Option<AblationResult>,
    pub stats_split: Vec<ComparisonRow>,
    pub stats_outcome: Vec<ComparisonRow>,
}

impl PipelineOutput {
    pub fn model(&self, name: &str) -> Option<&TrainedModel> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn evaluation(&self, name: &str) -> Option<&Evaluation> {
        self.evaluations.iter().find(|m| m.model == name)
    }
}

/// Run every stage in order. Errors carry the failing stage.
pub fn run_pipeline<E: Executor>(cohort: &Cohort, config: &PipelineConfig, seed: u64, exec: &E) -> core::result::Result<PipelineOutput, StageError> {
    config.validate().stage(Stage::Config)?;
    let prepared = prepare(cohort, config, seed).stage(Stage::Prepare)?;
    run_prepared(prepared, config, seed, exec)
}

pub fn run_prepared<E: Executor>(prepared: Prepared, config: &PipelineConfig, seed: u64, exec: &E) -> core::result::Result<PipelineOutput, StageError> {
    let selection = select_features(&prepared.train, &prepared.folds, &config.selection, selection_seed(seed), exec).stage(Stage::Select)?;
    let train = prepared.train.select_features(&selection.final_set).stage(Stage::Select)?;
    let test = prepared.test.select_features(&selection.final_set).stage(Stage::Select)?;
    let models: Vec<TrainedModel> = config
        .models
        .iter()
        .map(|entry| train_model(entry, &train, &prepared.folds, config, seed, exec))
        .collect::<Result<_>>()
        .stage(Stage::Train)?;
    let evaluations: Vec<Evaluation> = models
        .iter()
        .map(|m| evaluate_model(&m.name, &m.artifact, &train, &test, config, seed, exec))
        .collect::<Result<_>>()
        .stage(Stage::Evaluate)?;
    let find = |name: &str| models.iter().find(|m| m.name == name).expect("validated model name");
    let shap = match &config.explain_model {
        Some(name) => Some(explain_model(name, &find(name).artifact, &test, exec).stage(Stage::Explain)?),
        None => None,
    };
    let ablation = if config.ablation.enabled {
        let params: &ModelParams = &find(&config.ablation.model).grid.best_params;
        Some(
            ablation_study(&train, &test, params, &config.smote, config.ablation.repeats, ablation_seed(seed), exec)
                .stage(Stage::Ablate)?,
        )
    } else {
        None
    };
    let stats_split = split_statistics(&prepared.cohort, &prepared.split);
    let stats_outcome = outcome_statistics(&prepared.cohort);
    Ok(PipelineOutput { prepared, selection, train, test, models, evaluations, shap, ablation, stats_split, stats_outcome })
}
