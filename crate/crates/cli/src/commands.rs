//! Stage implementations shared by the individual subcommands and `run`.
//! Every stage returns the files it emits; `run` chains the stages in memory
//! and writes exactly what the chained subcommands would.

use std::path::{Path, PathBuf};

use panc_risk_core::cohort::{apply_exclusions, generate_synthetic, Cohort};
use panc_risk_core::evaluate::{CalibrationBin, RocPoint};
use panc_risk_core::explain::ablation::{ablation_study, AblationResult};
use panc_risk_core::explain::stats::ComparisonRow;
use panc_risk_core::models::artifact::{ModelArtifact, ModelParams};
use panc_risk_core::models::grid::GridResult;
use panc_risk_core::pipeline::{
    ablation_seed, evaluate_model, explain_model, outcome_statistics, prepare, selection_seed, split_statistics, train_model,
    Evaluation, Prepared, ShapReport, Stage, StageError,
};
use panc_risk_core::preprocess::{FeatureMatrix, Preprocessor, SplitIndex};
use panc_risk_core::resample::FoldPlan;
use panc_risk_core::select::{select_features, SelectionReport};
use serde::{Deserialize, Serialize};

use crate::bundle::Bundle;
use crate::config::{RunConfig, Source};
use crate::error::{CliError, Result};
use crate::exec::Pool;
use crate::io::{cohort_csv, ingest, json_bytes, read_cohort, read_json, to_csv};
use crate::svg::{self, Series};

pub const COHORT_FILE: &str = "cohort.csv";
pub const SPLIT_FILE: &str = "split.json";
pub const FOLDS_FILE: &str = "folds.json";
pub const TRAIN_MATRIX: &str = "train_matrix.json";
pub const TEST_MATRIX: &str = "test_matrix.json";
pub const SELECTION_FILE: &str = "selection.json";

pub fn model_file(name: &str) -> String {
    format!("models/{name}.json")
}

pub fn cv_file(name: &str) -> String {
    format!("cv_{name}.json")
}

pub fn metrics_file(name: &str) -> String {
    format!("metrics_{name}.json")
}

/// Shared state for one invocation.
pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub seed: u64,
    pub pool: &'a Pool,
    pub out: PathBuf,
}

trait At<T> {
    fn at(self, stage: Stage) -> Result<T>;
}

impl<T> At<T> for panc_risk_core::Result<T> {
    fn at(self, stage: Stage) -> Result<T> {
        self.map_err(|error| CliError::Stage(StageError { stage, error }))
    }
}

fn g(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, g)
}

// --- cohort -----------------------------------------------------------------

/// The cohort named by the config (synthetic spec or extract files).
pub fn config_cohort(ctx: &Ctx<'_>) -> Result<Cohort> {
    match ctx.cfg.source()? {
        Source::Synthetic(spec) => Ok(generate_synthetic(&spec, ctx.seed).map_err(|e| CliError::Config(e.to_string()))?),
        Source::Extract(paths) => ingest(&paths.static_csv, &paths.events_csv),
    }
}

pub fn cohort_bundle(cohort: &Cohort) -> Bundle {
    let mut b = Bundle::new();
    b.add(COHORT_FILE, cohort_csv(cohort));
    b
}

// --- select -----------------------------------------------------------------

/// Output of the preparation and selection stages.
pub struct Selected {
    pub prepared: Prepared,
    pub selection: SelectionReport,
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
}

pub fn stage_select(ctx: &Ctx<'_>, cohort: &Cohort) -> Result<(Selected, Bundle)> {
    let p = &ctx.cfg.pipeline;
    let prepared = prepare(cohort, p, ctx.seed).at(Stage::Prepare)?;
    eprintln!(
        "prepare: {} of {} patients after exclusions, {} train / {} test",
        prepared.cohort.len(),
        cohort.len(),
        prepared.split.train_rows.len(),
        prepared.split.test_rows.len()
    );
    let selection = select_features(&prepared.train, &prepared.folds, &p.selection, selection_seed(ctx.seed), ctx.pool).at(Stage::Select)?;
    eprintln!("select: {} features kept: {}", selection.final_set.len(), selection.final_set.join(", "));
    let train = prepared.train.select_features(&selection.final_set).at(Stage::Select)?;
    let test = prepared.test.select_features(&selection.final_set).at(Stage::Select)?;

    let mut b = Bundle::new();
    b.add("exclusions.json", json_bytes(&prepared.exclusion_log));
    b.add(SPLIT_FILE, json_bytes(&prepared.split));
    b.add("preprocessor.json", json_bytes(&prepared.preprocessor));
    b.add(FOLDS_FILE, json_bytes(&prepared.folds));
    b.add(SELECTION_FILE, json_bytes(&selection));
    b.add(
        "rfecv_curve.csv",
        to_csv(&["feature_count", "mean_auroc"], selection.rfecv_curve.iter().map(|c| vec![c.feature_count.to_string(), g(c.mean_auroc)])),
    );
    b.add(
        "lasso_cv.csv",
        to_csv(&["lambda", "mean_auroc", "nonzero"], selection.lasso_cv.iter().map(|c| vec![g(c.lambda), g(c.mean_auroc), c.nonzero.to_string()])),
    );
    b.add(TRAIN_MATRIX, json_bytes(&train));
    b.add(TEST_MATRIX, json_bytes(&test));
    let curve = Series { name: "RFECV", points: selection.rfecv_curve.iter().map(|c| (c.feature_count as f64, c.mean_auroc)).collect() };
    b.add("plots/rfecv_curve.svg", svg::line_chart("RFECV", "features", "mean CV AUROC", &[curve], false).into_bytes());
    Ok((Selected { prepared, selection, train, test }, b))
}

// --- train ------------------------------------------------------------------

pub fn stage_train(ctx: &Ctx<'_>, train: &FeatureMatrix, folds: &FoldPlan) -> Result<(Vec<(String, ModelArtifact, GridResult)>, Bundle)> {
    let mut b = Bundle::new();
    let mut out = Vec::new();
    for entry in &ctx.cfg.pipeline.models {
        let m = train_model(entry, train, folds, &ctx.cfg.pipeline, ctx.seed, ctx.pool).at(Stage::Train)?;
        let best = &m.grid.cv_table[m.grid.best_index];
        eprintln!("train: {} best candidate {} (CV AUROC {})", m.name, m.grid.best_index, opt(best.mean_auroc));
        b.add(model_file(&m.name), json_bytes(&m.artifact));
        b.add(cv_file(&m.name), json_bytes(&m.grid));
        b.add(
            format!("cv_{}.csv", m.name),
            to_csv(
                &["candidate", "params", "mean_auroc", "sd_auroc", "fold_auroc", "error"],
                m.grid.cv_table.iter().map(|r| {
                    vec![
                        r.candidate.to_string(),
                        serde_json::to_string(&r.params).expect("serializable"),
                        opt(r.mean_auroc),
                        opt(r.sd_auroc),
                        r.fold_auroc.iter().map(|v| g(*v)).collect::<Vec<_>>().join(";"),
                        r.error.clone().unwrap_or_default(),
                    ]
                }),
            ),
        );
        out.push((m.name, m.artifact, m.grid));
    }
    Ok((out, b))
}

// --- evaluate ---------------------------------------------------------------

#[derive(Serialize, Deserialize)]
pub struct MetricsFile {
    pub model: String,
    pub train: panc_risk_core::evaluate::MetricsReport,
    pub test: panc_risk_core::evaluate::MetricsReport,
}

fn roc_csv(points: &[RocPoint]) -> Vec<u8> {
    to_csv(
        &["threshold", "fpr", "tpr"],
        points.iter().map(|p| vec![if p.threshold.is_infinite() { "inf".into() } else { g(p.threshold) }, g(p.fpr), g(p.tpr)]),
    )
}

fn calibration_csv(bins: &[CalibrationBin]) -> Vec<u8> {
    to_csv(
        &["lower", "upper", "mean_predicted", "observed_fraction", "count"],
        bins.iter().map(|c| vec![g(c.lower), g(c.upper), opt(c.mean_predicted), opt(c.observed_fraction), c.count.to_string()]),
    )
}

fn summary_row(model: &str, split: &str, r: &panc_risk_core::evaluate::MetricsReport) -> Vec<String> {
    let mut row = vec![model.to_string(), split.to_string(), g(r.threshold)];
    for i in [&r.auroc, &r.accuracy, &r.f1, &r.sensitivity, &r.specificity, &r.ppv, &r.npv] {
        row.extend([opt(i.point), opt(i.lo), opt(i.hi)]);
    }
    row
}

const SUMMARY_HEADER: [&str; 24] = [
    "model", "split", "threshold", "auroc", "auroc_lo", "auroc_hi", "accuracy", "accuracy_lo", "accuracy_hi", "f1", "f1_lo", "f1_hi",
    "sensitivity", "sensitivity_lo", "sensitivity_hi", "specificity", "specificity_lo", "specificity_hi", "ppv", "ppv_lo", "ppv_hi",
    "npv", "npv_lo", "npv_hi",
];

pub fn stage_evaluate(ctx: &Ctx<'_>, models: &[(String, ModelArtifact)], train: &FeatureMatrix, test: &FeatureMatrix) -> Result<(Vec<Evaluation>, Bundle)> {
    let mut b = Bundle::new();
    let mut evals = Vec::new();
    for (name, artifact) in models {
        let e = evaluate_model(name, artifact, train, test, &ctx.cfg.pipeline, ctx.seed, ctx.pool).at(Stage::Evaluate)?;
        eprintln!("evaluate: {name} test AUROC {}", opt(e.test.auroc.point));
        b.add(metrics_file(name), json_bytes(&MetricsFile { model: name.clone(), train: e.train.clone(), test: e.test.clone() }));
        b.add(format!("roc_{name}.csv"), roc_csv(&e.roc));
        b.add(format!("calibration_{name}.csv"), calibration_csv(&e.calibration));
        let roc = Series { name, points: e.roc.iter().map(|p| (p.fpr, p.tpr)).collect() };
        b.add(format!("plots/roc_{name}.svg"), svg::line_chart(&format!("ROC: {name}"), "false positive rate", "true positive rate", &[roc], true).into_bytes());
        let cal = Series {
            name,
            points: e.calibration.iter().filter_map(|c| Some((c.mean_predicted?, c.observed_fraction?))).collect(),
        };
        b.add(
            format!("plots/calibration_{name}.svg"),
            svg::line_chart(&format!("Calibration: {name}"), "mean predicted probability", "observed fraction", &[cal], true).into_bytes(),
        );
        evals.push(e);
    }
    let rows = evals.iter().flat_map(|e| [summary_row(&e.model, "train", &e.train), summary_row(&e.model, "test", &e.test)]);
    b.add("metrics_summary.csv", to_csv(&SUMMARY_HEADER, rows));
    Ok((evals, b))
}

// --- explain ----------------------------------------------------------------

fn stats_csv(rows: &[ComparisonRow], g1: &str, g2: &str) -> Vec<u8> {
    let header = [
        "feature".to_string(),
        format!("{g1}_mean"),
        format!("{g1}_sd"),
        format!("{g2}_mean"),
        format!("{g2}_sd"),
        "p_value".into(),
        "test".into(),
        "statistic".into(),
        "df".into(),
        "student_p".into(),
        "welch_p".into(),
        "variants_disagree".into(),
        format!("n_{g1}"),
        format!("n_{g2}"),
        "note".into(),
    ];
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    to_csv(
        &header,
        rows.iter().map(|r| {
            let primary = r.welch.as_ref().or(r.chi_square.as_ref());
            let moments = r.welch.as_ref();
            vec![
                r.feature.clone(),
                opt(moments.and_then(|t| t.mean1)),
                opt(moments.and_then(|t| t.sd1)),
                opt(moments.and_then(|t| t.mean2)),
                opt(moments.and_then(|t| t.sd2)),
                opt(primary.map(|t| t.p_value)),
                primary.map_or(String::new(), |t| serde_json::to_value(t.kind).expect("serializable").as_str().unwrap_or_default().to_string()),
                opt(primary.map(|t| t.statistic)),
                opt(primary.map(|t| t.df)),
                opt(r.student.as_ref().map(|t| t.p_value)),
                opt(r.welch.as_ref().map(|t| t.p_value)),
                u8::from(r.variants_disagree).to_string(),
                primary.map_or(String::new(), |t| t.n1.to_string()),
                primary.map_or(String::new(), |t| t.n2.to_string()),
                r.skipped.clone().unwrap_or_default(),
            ]
        }),
    )
}

fn shap_files(b: &mut Bundle, report: &ShapReport) {
    b.add(
        "shap_summary.csv",
        to_csv(
            &["feature", "instance_id", "shap_value", "feature_value"],
            report.summary.iter().map(|r| vec![r.feature.clone(), r.instance_id.clone(), g(r.shap_value), g(r.feature_value)]),
        ),
    );
    b.add("shap_mean_abs.csv", to_csv(&["feature", "mean_abs_shap"], report.mean_abs.iter().map(|(f, v)| vec![f.clone(), g(*v)])));
    #[derive(Serialize)]
    struct Meta<'a> {
        model: &'a str,
        space: &'a str,
        background: &'a str,
        base_value: f64,
        instances: usize,
    }
    let meta = Meta {
        model: &report.model,
        space: &report.space,
        background: &report.background,
        base_value: report.base_value,
        instances: report.instance_ids.len(),
    };
    b.add("shap_meta.json", json_bytes(&meta));
    let mut grouped: Vec<(String, Vec<(f64, f64)>)> = report.mean_abs.iter().map(|(f, _)| (f.clone(), Vec::new())).collect();
    for r in &report.summary {
        if let Some(g) = grouped.iter_mut().find(|g| g.0 == r.feature) {
            g.1.push((r.shap_value, r.feature_value));
        }
    }
    b.add("plots/shap_summary.svg", svg::shap_summary(&format!("SHAP summary: {}", report.model), &grouped).into_bytes());
}

/// SHAP for the configured tree model plus the split and outcome statistics
/// on the post-exclusion cohort.
pub fn stage_explain(ctx: &Ctx<'_>, models: &[(String, ModelArtifact)], test: &FeatureMatrix, cohort: &Cohort, split: &SplitIndex) -> Result<Bundle> {
    let mut b = Bundle::new();
    if let Some(name) = &ctx.cfg.pipeline.explain_model {
        let (_, artifact) = models
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| CliError::Config(format!("explain model `{name}` was not trained")))?;
        let report = explain_model(name, artifact, test, ctx.pool).at(Stage::Explain)?;
        let top: Vec<&str> = report.mean_abs.iter().take(3).map(|(f, _)| f.as_str()).collect();
        eprintln!("explain: top features by mean |SHAP|: {}", top.join(", "));
        shap_files(&mut b, &report);
    }
    b.add("stats_split.csv", stats_csv(&split_statistics(cohort, split), "train", "test"));
    b.add("stats_outcome.csv", stats_csv(&outcome_statistics(cohort), "non_readmitted", "readmitted"));
    Ok(b)
}

// --- ablate -----------------------------------------------------------------

pub fn ablation_files(result: &AblationResult) -> Bundle {
    let mut b = Bundle::new();
    let rows = result.features.iter().flat_map(|f| {
        f.cells.iter().map(|c| {
            vec![f.feature.clone(), c.repeat.to_string(), opt(result.baseline[c.repeat]), opt(c.auroc), opt(c.delta), c.error.clone().unwrap_or_default()]
        })
    });
    b.add("ablation.csv", to_csv(&["feature", "repeat", "baseline_auroc", "auroc", "delta", "error"], rows));
    b.add(
        "ablation_summary.csv",
        to_csv(
            &["feature", "median_delta", "q1", "q3", "completed"],
            result.features.iter().map(|f| {
                vec![f.feature.clone(), opt(f.median), opt(f.q1), opt(f.q3), f.cells.iter().filter(|c| c.delta.is_some()).count().to_string()]
            }),
        ),
    );
    b.add("ablation_seeds.json", json_bytes(&result.seeds));
    let bars: Vec<(String, f64, Option<(f64, f64)>)> =
        result.features.iter().filter_map(|f| Some((f.feature.clone(), f.median?, f.q1.zip(f.q3)))).collect();
    b.add("plots/ablation.svg", svg::bar_chart("Feature ablation", "median AUROC change when removed", &bars).into_bytes());
    b
}

pub fn stage_ablate(ctx: &Ctx<'_>, params: &ModelParams, train: &FeatureMatrix, test: &FeatureMatrix) -> Result<Bundle> {
    let p = &ctx.cfg.pipeline;
    let result = ablation_study(train, test, params, &p.smote, p.ablation.repeats, ablation_seed(ctx.seed), ctx.pool).at(Stage::Ablate)?;
    eprintln!("ablate: {} features x {} repeats", result.features.len(), result.repeats);
    Ok(ablation_files(&result))
}

// --- stage inputs from disk --------------------------------------------------

fn path(ctx: &Ctx<'_>, rel: &str) -> PathBuf {
    ctx.out.join(rel)
}

pub fn load_cohort(ctx: &Ctx<'_>, from: Option<&Path>) -> Result<Cohort> {
    read_cohort(&from.map_or_else(|| path(ctx, COHORT_FILE), Path::to_path_buf))
}

pub fn load_matrices(ctx: &Ctx<'_>) -> Result<(FeatureMatrix, FeatureMatrix)> {
    Ok((read_json(&path(ctx, TRAIN_MATRIX))?, read_json(&path(ctx, TEST_MATRIX))?))
}

pub fn load_folds(ctx: &Ctx<'_>) -> Result<FoldPlan> {
    read_json(&path(ctx, FOLDS_FILE))
}

pub fn load_models(ctx: &Ctx<'_>) -> Result<Vec<(String, ModelArtifact)>> {
    ctx.cfg.pipeline.models.iter().map(|m| Ok((m.name.clone(), read_json(&path(ctx, &model_file(&m.name)))?))).collect()
}

pub fn load_best_params(ctx: &Ctx<'_>, model: &str) -> Result<ModelParams> {
    let grid: GridResult = read_json(&path(ctx, &cv_file(model)))?;
    Ok(grid.best_params)
}

/// Post-exclusion cohort and split for the statistics tables.
pub fn load_split_cohort(ctx: &Ctx<'_>, from: Option<&Path>) -> Result<(Cohort, SplitIndex)> {
    let (cohort, _) = apply_exclusions(&load_cohort(ctx, from)?);
    let split: SplitIndex = read_json(&path(ctx, SPLIT_FILE))?;
    let n = split.train_rows.len() + split.test_rows.len();
    if n != cohort.len() {
        return Err(CliError::Format {
            path: path(ctx, SPLIT_FILE),
            message: format!("split covers {n} rows but the cohort has {} after exclusions", cohort.len()),
        });
    }
    Ok((cohort, split))
}

/// The preprocessor saved by `select`, for callers that transform new rows.
pub fn load_preprocessor(ctx: &Ctx<'_>) -> Result<Preprocessor> {
    read_json(&path(ctx, "preprocessor.json"))
}

/// All stages in order on an in-memory cohort.
pub fn run_all(ctx: &Ctx<'_>, cohort: &Cohort) -> Result<Bundle> {
    let mut bundle = cohort_bundle(cohort);
    let (sel, b) = stage_select(ctx, cohort)?;
    bundle.merge(b);
    let (trained, b) = stage_train(ctx, &sel.train, &sel.prepared.folds)?;
    bundle.merge(b);
    let models: Vec<(String, ModelArtifact)> = trained.iter().map(|(n, a, _)| (n.clone(), a.clone())).collect();
    let (_, b) = stage_evaluate(ctx, &models, &sel.train, &sel.test)?;
    bundle.merge(b);
    bundle.merge(stage_explain(ctx, &models, &sel.test, &sel.prepared.cohort, &sel.prepared.split)?);
    let p = &ctx.cfg.pipeline;
    if p.ablation.enabled {
        let (_, _, grid) = trained.iter().find(|(n, _, _)| *n == p.ablation.model).expect("validated ablation model");
        bundle.merge(stage_ablate(ctx, &grid.best_params, &sel.train, &sel.test)?);
    }
    Ok(bundle)
}
