//! Threshold metrics, AUROC, ROC and calibration curves, and bootstrap
//! percentile intervals.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::math::quantile_sorted;
use crate::par::Executor;
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn n(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Predict positive iff `score >= threshold`.
pub fn confusion_at_threshold(scores: &[f64], labels: &[bool], threshold: f64) -> Result<ConfusionCounts> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    let mut c = ConfusionCounts::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Threshold metrics; `None` marks a 0/0 ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics_from_confusion(c: &ConfusionCounts) -> ThresholdMetrics {
    let sensitivity = ratio(c.tp, c.tp + c.fn_);
    let ppv = ratio(c.tp, c.tp + c.fp);
    let f1 = match (ppv, sensitivity) {
        (Some(p), Some(s)) if p + s > 0.0 => Some(2.0 * p * s / (p + s)),
        _ => None,
    };
    ThresholdMetrics {
        accuracy: ratio(c.tp + c.tn, c.n()),
        f1,
        sensitivity,
        specificity: ratio(c.tn, c.tn + c.fp),
        ppv,
        npv: ratio(c.tn, c.tn + c.fn_),
    }
}

fn class_counts(labels: &[bool]) -> (u64, u64) {
    let pos = labels.iter().filter(|&&y| y).count() as u64;
    (pos, labels.len() as u64 - pos)
}

/// Indices sorted by ascending score.
fn ascending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    idx
}

/// Mann-Whitney AUROC with ties counted one half. Computed in integer
/// arithmetic as `2U / (2 n_pos n_neg)`.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let idx = ascending(scores);
    let mut twice_u: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u64, 0u64);
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            if labels[idx[j]] {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice_u += pos * (2 * neg_below + neg);
        neg_below += neg;
        i = j;
    }
    Ok(twice_u as f64 / (2 * n_pos * n_neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores `>= threshold` are called positive; the first point uses `+inf`.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC staircase over distinct score thresholds, descending, from (0,0) to (1,1).
pub fn roc_points(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>> {
    auroc(scores, labels)?;
    let (n_pos, n_neg) = class_counts(labels);
    let mut idx = ascending(scores);
    idx.reverse();
    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == s {
            if labels[idx[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint { threshold: s, fpr: fp as f64 / n_neg as f64, tpr: tp as f64 / n_pos as f64 });
    }
    Ok(points)
}

pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub mean_predicted: Option<f64>,
    pub observed_fraction: Option<f64>,
    pub count: u64,
}

pub const CALIBRATION_BINS: usize = 10;

/// Ten equal-width bins over `[0, 1]`; the last bin is closed on the right.
pub fn calibration(scores: &[f64], labels: &[bool]) -> Result<Vec<CalibrationBin>> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    let k = CALIBRATION_BINS;
    let mut sum = vec![0.0; k];
    let mut pos = vec![0u64; k];
    let mut count = vec![0u64; k];
    for (&s, &y) in scores.iter().zip(labels) {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidParam("scores must lie in [0, 1]".into()));
        }
        let b = ((s * k as f64) as usize).min(k - 1);
        sum[b] += s;
        count[b] += 1;
        pos[b] += u64::from(y);
    }
    Ok((0..k)
        .map(|b| CalibrationBin {
            lower: b as f64 / k as f64,
            upper: (b + 1) as f64 / k as f64,
            mean_predicted: (count[b] > 0).then(|| sum[b] / count[b] as f64),
            observed_fraction: ratio(pos[b], count[b]),
            count: count[b],
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// Always 0.5.
    Fixed,
    /// Maximize sensitivity + specificity - 1 over distinct scores; ties go to
    /// the lower threshold.
    Youden,
}

pub fn pick_threshold(scores: &[f64], labels: &[bool], policy: ThresholdPolicy) -> Result<f64> {
    match policy {
        ThresholdPolicy::Fixed => Ok(0.5),
        ThresholdPolicy::Youden => {
            if scores.len() != labels.len() {
                return Err(Error::LengthMismatch(scores.len(), labels.len()));
            }
            let (n_pos, n_neg) = class_counts(labels);
            if n_pos == 0 || n_neg == 0 {
                return Err(Error::SingleClass);
            }
            // J * n_pos * n_neg = tp * n_neg + tn * n_pos - n_pos * n_neg, compared exactly
            let idx = ascending(scores);
            let (mut tp, mut tn) = (n_pos as i128, 0i128);
            let mut best: Option<(i128, f64)> = None;
            let mut i = 0;
            while i < idx.len() {
                let s = scores[idx[i]];
                let j = tp * n_neg as i128 + tn * n_pos as i128;
                if best.is_none_or(|(b, _)| j > b) {
                    best = Some((j, s));
                }
                while i < idx.len() && scores[idx[i]] == s {
                    if labels[idx[i]] {
                        tp -= 1;
                    } else {
                        tn += 1;
                    }
                    i += 1;
                }
            }
            Ok(best.map_or(0.5, |(_, s)| s))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Auroc,
    Accuracy,
    F1,
    Sensitivity,
    Specificity,
    Ppv,
    Npv,
}

impl Metric {
    pub const ALL: [Metric; 7] =
        [Metric::Auroc, Metric::Accuracy, Metric::F1, Metric::Sensitivity, Metric::Specificity, Metric::Ppv, Metric::Npv];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Auroc => "auroc",
            Metric::Accuracy => "accuracy",
            Metric::F1 => "f1",
            Metric::Sensitivity => "sensitivity",
            Metric::Specificity => "specificity",
            Metric::Ppv => "ppv",
            Metric::Npv => "npv",
        }
    }
}

fn all_metrics(scores: &[f64], labels: &[bool], threshold: f64) -> [Option<f64>; 7] {
    let c = confusion_at_threshold(scores, labels, threshold).unwrap_or_default();
    let m = metrics_from_confusion(&c);
    [auroc(scores, labels).ok(), m.accuracy, m.f1, m.sensitivity, m.specificity, m.ppv, m.npv]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub point: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub intervals: Vec<(Metric, Interval)>,
    pub replicates: usize,
    /// Resamples drawn again because they contained a single class.
    pub redraws: u64,
}

/// Paired bootstrap of every metric at a fixed threshold. Each replicate
/// draws from its own stream `(seed, "bootstrap", replicate)`. Intervals are
/// 2.5/97.5 percentiles with linear interpolation, widened if necessary to
/// contain the point estimate.
pub fn bootstrap_metrics<E: Executor>(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
    b: usize,
    seed: u64,
    exec: &E,
) -> Result<BootstrapSummary> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    let n = scores.len();
    let (n_pos, n_neg) = class_counts(labels);
    if n < 2 || n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    if b == 0 {
        return Err(Error::InvalidParam("bootstrap replicates must be >= 1".into()));
    }
    let reps: Vec<([Option<f64>; 7], u64)> = exec.map(b, |r| {
        let mut rng = rng::stream(seed, "bootstrap", &[r as u64]);
        let mut s = vec![0.0; n];
        let mut y = vec![false; n];
        let mut redraws = 0u64;
        loop {
            for k in 0..n {
                let i = rng.random_range(0..n);
                s[k] = scores[i];
                y[k] = labels[i];
            }
            if y.iter().any(|&v| v) && y.iter().any(|&v| !v) {
                break;
            }
            redraws += 1;
        }
        (all_metrics(&s, &y, threshold), redraws)
    });
    let point = all_metrics(scores, labels, threshold);
    let intervals = Metric::ALL
        .iter()
        .enumerate()
        .map(|(k, &metric)| {
            let mut vals: Vec<f64> = reps.iter().filter_map(|(m, _)| m[k]).collect();
            vals.sort_by(f64::total_cmp);
            let (mut lo, mut hi) = if vals.is_empty() {
                (None, None)
            } else {
                (Some(quantile_sorted(&vals, 0.025)), Some(quantile_sorted(&vals, 0.975)))
            };
            if let (Some(p), Some(l), Some(h)) = (point[k], lo, hi) {
                lo = Some(l.min(p));
                hi = Some(h.max(p));
            }
            (metric, Interval { point: point[k], lo, hi })
        })
        .collect();
    Ok(BootstrapSummary { intervals, replicates: b, redraws: reps.iter().map(|r| r.1).sum() })
}

/// Percentile interval for a single metric.
pub fn bootstrap_ci<E: Executor>(
    metric: Metric,
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
    b: usize,
    seed: u64,
    exec: &E,
) -> Result<Interval> {
    let s = bootstrap_metrics(scores, labels, threshold, b, seed, exec)?;
    Ok(s.intervals.into_iter().find(|(m, _)| *m == metric).map(|(_, i)| i).expect("all metrics present"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub positives: usize,
    pub threshold: f64,
    pub threshold_policy: ThresholdPolicy,
    pub confusion: ConfusionCounts,
    pub auroc: Interval,
    pub accuracy: Interval,
    pub f1: Interval,
    pub sensitivity: Interval,
    pub specificity: Interval,
    pub ppv: Interval,
    pub npv: Interval,
    pub bootstrap_replicates: usize,
    pub bootstrap_redraws: u64,
}

#[allow(clippy::too_many_arguments)]
pub fn metrics_report<E: Executor>(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
    policy: ThresholdPolicy,
    b: usize,
    seed: u64,
    exec: &E,
) -> Result<MetricsReport> {
    let s = bootstrap_metrics(scores, labels, threshold, b, seed, exec)?;
    let get = |m: Metric| s.intervals.iter().find(|(k, _)| *k == m).map(|(_, i)| *i).expect("all metrics present");
    Ok(MetricsReport {
        n: scores.len(),
        positives: labels.iter().filter(|&&y| y).count(),
        threshold,
        threshold_policy: policy,
        confusion: confusion_at_threshold(scores, labels, threshold)?,
        auroc: get(Metric::Auroc),
        accuracy: get(Metric::Accuracy),
        f1: get(Metric::F1),
        sensitivity: get(Metric::Sensitivity),
        specificity: get(Metric::Specificity),
        ppv: get(Metric::Ppv),
        npv: get(Metric::Npv),
        bootstrap_replicates: s.replicates,
        bootstrap_redraws: s.redraws,
    })
}
