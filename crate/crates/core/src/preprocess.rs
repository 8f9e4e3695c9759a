//! Fit-on-train / apply-everywhere transforms: label encoding, median/mode
//! imputation, min-max scaling, and the stratified train/test split.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cohort::{Cell, Cohort, ColumnKind};
use crate::math::{median, round};
use crate::{rng, Error, Result};

/// Code given to categories never seen in the training rows.
pub const UNSEEN_CATEGORY: f64 = -1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ColumnType {
    Numeric,
    /// Label-encoded column; code `k` stands for `levels[k]`.
    Categorical { levels: Vec<String> },
}

/// Dense row-major `n x p` matrix with an observation mask, aligned labels
/// and row identifiers. Missing cells hold `0.0` and `mask == false`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    feature_names: Vec<String>,
    columns: Vec<ColumnType>,
    values: Vec<f64>,
    mask: Vec<bool>,
    labels: Vec<bool>,
    row_ids: Vec<String>,
    synthetic: Vec<bool>,
}

impl FeatureMatrix {
    pub fn new(
        feature_names: Vec<String>,
        columns: Vec<ColumnType>,
        values: Vec<f64>,
        mask: Vec<bool>,
        labels: Vec<bool>,
        row_ids: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        let synthetic = vec![false; n];
        let m = Self { feature_names, columns, values, mask, labels, row_ids, synthetic };
        m.check()?;
        Ok(m)
    }

    /// Fully observed numeric matrix; row ids are `r0, r1, ...`.
    pub fn from_rows(feature_names: Vec<String>, rows: &[Vec<f64>], labels: Vec<bool>) -> Result<Self> {
        let p = feature_names.len();
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch(rows.len(), labels.len()));
        }
        let mut values = Vec::with_capacity(rows.len() * p);
        for r in rows {
            if r.len() != p {
                return Err(Error::LengthMismatch(r.len(), p));
            }
            values.extend_from_slice(r);
        }
        let row_ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
        let columns = vec![ColumnType::Numeric; p];
        let mask = vec![true; values.len()];
        Self::new(feature_names, columns, values, mask, labels, row_ids)
    }

    fn check(&self) -> Result<()> {
        let n = self.labels.len();
        let p = self.feature_names.len();
        if self.columns.len() != p {
            return Err(Error::LengthMismatch(self.columns.len(), p));
        }
        if self.values.len() != n * p || self.mask.len() != n * p {
            return Err(Error::LengthMismatch(self.values.len(), n * p));
        }
        if self.row_ids.len() != n || self.synthetic.len() != n {
            return Err(Error::LengthMismatch(self.row_ids.len(), n));
        }
        let mut seen = BTreeSet::new();
        for name in &self.feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidRecord(format!("duplicate feature name `{name}`")));
            }
        }
        if self.values.iter().zip(&self.mask).any(|(v, &m)| m && !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn columns(&self) -> &[ColumnType] {
        &self.columns
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn synthetic(&self) -> &[bool] {
        &self.synthetic
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_features() + col]
    }

    #[inline]
    pub fn observed(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.n_features() + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        let p = self.n_features();
        &self.values[row * p..(row + 1) * p]
    }

    #[inline]
    pub fn row_mask(&self, row: usize) -> &[bool] {
        let p = self.n_features();
        &self.mask[row * p..(row + 1) * p]
    }

    pub fn is_fully_observed(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y).count()
    }

    /// Observed values of one column.
    pub fn observed_column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows()).filter(|&i| self.observed(i, col)).map(|i| self.value(i, col)).collect()
    }

    pub fn take_rows(&self, rows: &[usize]) -> Self {
        let p = self.n_features();
        let mut values = Vec::with_capacity(rows.len() * p);
        let mut mask = Vec::with_capacity(rows.len() * p);
        for &r in rows {
            values.extend_from_slice(self.row(r));
            mask.extend_from_slice(self.row_mask(r));
        }
        Self {
            feature_names: self.feature_names.clone(),
            columns: self.columns.clone(),
            values,
            mask,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            row_ids: rows.iter().map(|&r| self.row_ids[r].clone()).collect(),
            synthetic: rows.iter().map(|&r| self.synthetic[r]).collect(),
        }
    }

    pub fn take_columns(&self, cols: &[usize]) -> Self {
        let p = self.n_features();
        let n = self.n_rows();
        let mut values = Vec::with_capacity(n * cols.len());
        let mut mask = Vec::with_capacity(n * cols.len());
        for i in 0..n {
            for &c in cols {
                values.push(self.values[i * p + c]);
                mask.push(self.mask[i * p + c]);
            }
        }
        Self {
            feature_names: cols.iter().map(|&c| self.feature_names[c].clone()).collect(),
            columns: cols.iter().map(|&c| self.columns[c].clone()).collect(),
            values,
            mask,
            labels: self.labels.clone(),
            row_ids: self.row_ids.clone(),
            synthetic: self.synthetic.clone(),
        }
    }

    /// Restrict to the named columns, in the given order.
    pub fn select_features(&self, names: &[String]) -> Result<Self> {
        let cols = names
            .iter()
            .map(|n| self.column_index(n).ok_or_else(|| Error::UnknownColumn(n.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.take_columns(&cols))
    }

    pub fn without_column(&self, col: usize) -> Self {
        let keep: Vec<usize> = (0..self.n_features()).filter(|&c| c != col).collect();
        self.take_columns(&keep)
    }

    /// Append a fully observed synthetic row.
    pub fn push_synthetic(&mut self, values: &[f64], label: bool, row_id: String) {
        debug_assert_eq!(values.len(), self.n_features());
        self.values.extend_from_slice(values);
        self.mask.extend(core::iter::repeat_n(true, values.len()));
        self.labels.push(label);
        self.row_ids.push(row_id);
        self.synthetic.push(true);
    }

    /// Mutable access for tests that perturb rows.
    pub fn set_value(&mut self, row: usize, col: usize, value: f64) {
        let p = self.n_features();
        self.values[row * p + col] = value;
        self.mask[row * p + col] = true;
    }

    /// Mark a cell as missing.
    pub fn set_missing(&mut self, row: usize, col: usize) {
        let p = self.n_features();
        self.values[row * p + col] = 0.0;
        self.mask[row * p + col] = false;
    }
}

/// Per-column category lists in first-appearance order over training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEncoder {
    /// `None` for numeric columns.
    pub levels: Vec<Option<Vec<String>>>,
}

/// Categories in order of first appearance.
pub fn fit_levels<'a>(values: impl IntoIterator<Item = Option<&'a str>>) -> Vec<String> {
    let mut levels: Vec<String> = Vec::new();
    for v in values.into_iter().flatten() {
        if !levels.iter().any(|l| l == v) {
            levels.push(v.to_string());
        }
    }
    levels
}

/// Map categories to codes; unseen categories get [`UNSEEN_CATEGORY`] and
/// missing cells stay missing.
pub fn encode_levels<'a>(levels: &[String], values: impl IntoIterator<Item = Option<&'a str>>) -> Vec<Option<f64>> {
    values
        .into_iter()
        .map(|v| v.map(|s| levels.iter().position(|l| l == s).map_or(UNSEEN_CATEGORY, |k| k as f64)))
        .collect()
}

impl LabelEncoder {
    pub fn fit(cohort: &Cohort, train_rows: &[usize]) -> Self {
        let levels = (0..cohort.n_features())
            .map(|j| match cohort.feature_kind(j) {
                ColumnKind::Numeric => None,
                ColumnKind::Categorical => Some(fit_levels(train_rows.iter().map(|&i| match cohort.cell(i, j) {
                    Cell::Category(s) => Some(s),
                    _ => None,
                }))),
            })
            .collect();
        Self { levels }
    }

    /// Encoded (not imputed, not scaled) matrix for the given cohort rows.
    pub fn transform(&self, cohort: &Cohort, rows: &[usize]) -> Result<FeatureMatrix> {
        let p = cohort.n_features();
        if self.levels.len() != p {
            return Err(Error::LengthMismatch(self.levels.len(), p));
        }
        let mut values = Vec::with_capacity(rows.len() * p);
        let mut mask = Vec::with_capacity(rows.len() * p);
        for &i in rows {
            for j in 0..p {
                let v = match (cohort.cell(i, j), &self.levels[j]) {
                    (Cell::Number(x), None) => Some(x),
                    (Cell::Category(s), Some(levels)) => encode_levels(levels, [Some(s)])[0],
                    (Cell::Missing, _) => None,
                    _ => return Err(Error::InvalidRecord(format!("column {j} has an unexpected cell type"))),
                };
                values.push(v.unwrap_or(0.0));
                mask.push(v.is_some());
            }
        }
        let columns = self
            .levels
            .iter()
            .map(|l| match l {
                None => ColumnType::Numeric,
                Some(levels) => ColumnType::Categorical { levels: levels.clone() },
            })
            .collect();
        let records = cohort.records();
        FeatureMatrix::new(
            cohort.feature_names(),
            columns,
            values,
            mask,
            rows.iter().map(|&i| records[i].label).collect(),
            rows.iter().map(|&i| records[i].patient_id.clone()).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputeRule {
    Median(f64),
    Mode { category: String, code: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputeColumn {
    pub name: String,
    pub rule: ImputeRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputeParams {
    pub columns: Vec<ImputeColumn>,
}

/// Medians for numeric columns and modes for categorical columns, from the
/// observed training cells. Mode ties go to the lexicographically smallest
/// category.
pub fn fit_impute(train: &FeatureMatrix) -> Result<ImputeParams> {
    let mut columns = Vec::with_capacity(train.n_features());
    for j in 0..train.n_features() {
        let observed = train.observed_column(j);
        let name = train.feature_names()[j].clone();
        if observed.is_empty() {
            return Err(Error::EmptyColumn(name));
        }
        let rule = match &train.columns()[j] {
            ColumnType::Numeric => ImputeRule::Median(median(&observed)),
            ColumnType::Categorical { levels } => {
                let mut counts = vec![0usize; levels.len()];
                for &c in &observed {
                    if c >= 0.0 {
                        counts[c as usize] += 1;
                    }
                }
                let best = (0..levels.len())
                    .max_by(|&a, &b| counts[a].cmp(&counts[b]).then_with(|| levels[b].cmp(&levels[a])))
                    .ok_or_else(|| Error::EmptyColumn(name.clone()))?;
                ImputeRule::Mode { category: levels[best].clone(), code: best as f64 }
            }
        };
        columns.push(ImputeColumn { name, rule });
    }
    Ok(ImputeParams { columns })
}

pub fn apply_impute(m: &FeatureMatrix, params: &ImputeParams) -> Result<FeatureMatrix> {
    let fills = m
        .feature_names()
        .iter()
        .map(|name| {
            params
                .columns
                .iter()
                .find(|c| &c.name == name)
                .map(|c| match c.rule {
                    ImputeRule::Median(v) => v,
                    ImputeRule::Mode { code, .. } => code,
                })
                .ok_or_else(|| Error::UnknownColumn(name.clone()))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut out = m.clone();
    let p = m.n_features();
    for (k, (v, seen)) in out.values.iter_mut().zip(out.mask.iter_mut()).enumerate() {
        if !*seen {
            *v = fills[k % p];
            *seen = true;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleColumn {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub columns: Vec<ScaleColumn>,
}

/// Observed per-column range of the training rows.
pub fn fit_scale(train: &FeatureMatrix) -> ScalerParams {
    let columns = (0..train.n_features())
        .map(|j| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for v in train.observed_column(j) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if lo > hi {
                lo = 0.0;
                hi = 0.0;
            }
            ScaleColumn { name: train.feature_names()[j].clone(), min: lo, max: hi }
        })
        .collect();
    ScalerParams { columns }
}

/// `(x - min) / (max - min)` clipped to `[0, 1]`; constant training columns
/// map to 0.
pub fn apply_scale(m: &FeatureMatrix, params: &ScalerParams) -> Result<FeatureMatrix> {
    let ranges = m
        .feature_names()
        .iter()
        .map(|name| {
            params
                .columns
                .iter()
                .find(|c| &c.name == name)
                .map(|c| (c.min, c.max))
                .ok_or_else(|| Error::UnknownColumn(name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = m.clone();
    let p = m.n_features();
    for (k, (v, &seen)) in out.values.iter_mut().zip(&m.mask).enumerate() {
        if !seen {
            continue;
        }
        let (lo, hi) = ranges[k % p];
        *v = if hi > lo { ((*v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
    }
    Ok(out)
}

/// Encoder, imputer and scaler fitted on the same training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub encoder: LabelEncoder,
    pub impute: ImputeParams,
    pub scale: ScalerParams,
}

impl Preprocessor {
    /// Fit on the training rows; returns the fitted transforms along with the
    /// raw (encoded, unimputed) training matrix.
    pub fn fit(cohort: &Cohort, train_rows: &[usize]) -> Result<(Self, FeatureMatrix)> {
        let encoder = LabelEncoder::fit(cohort, train_rows);
        let raw = encoder.transform(cohort, train_rows)?;
        let impute = fit_impute(&raw)?;
        let scale = fit_scale(&apply_impute(&raw, &impute)?);
        Ok((Self { encoder, impute, scale }, raw))
    }

    pub fn raw(&self, cohort: &Cohort, rows: &[usize]) -> Result<FeatureMatrix> {
        self.encoder.transform(cohort, rows)
    }

    /// Impute and scale an encoded matrix.
    pub fn finish(&self, raw: &FeatureMatrix) -> Result<FeatureMatrix> {
        apply_scale(&apply_impute(raw, &self.impute)?, &self.scale)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndex {
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub seed: u64,
}

/// Per-class shuffled split. The test side receives `round(n * test_fraction)`
/// rows, apportioned between the classes by largest remainder so each class
/// count is within one row of its exact share. Index lists are returned sorted.
pub fn stratified_split(labels: &[bool], test_fraction: f64, seed: u64) -> Result<SplitIndex> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParam(format!("test_fraction {test_fraction} outside (0, 1)")));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        by_class[usize::from(y)].push(i);
    }
    for (class, idx) in by_class.iter().enumerate() {
        if idx.len() < 2 {
            return Err(Error::ClassTooSmall { label: class == 1, count: idx.len(), needed: 2 });
        }
    }
    let n = labels.len();
    let n_test = (round(n as f64 * test_fraction) as usize).clamp(1, n - 1);
    let quota = |c: usize| by_class[c].len() as f64 * n_test as f64 / n as f64;
    let mut counts = [libm::floor(quota(0)) as usize, libm::floor(quota(1)) as usize];
    if counts[0] + counts[1] < n_test {
        let (r0, r1) = (quota(0) - counts[0] as f64, quota(1) - counts[1] as f64);
        counts[usize::from(r1 > r0)] += 1;
    }
    let mut rng = rng::stream(seed, "train-test-split", &[]);
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for (class, mut idx) in by_class.into_iter().enumerate() {
        rng::shuffle(&mut rng, &mut idx);
        test_rows.extend_from_slice(&idx[..counts[class]]);
        train_rows.extend_from_slice(&idx[counts[class]..]);
    }
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok(SplitIndex { train_rows, test_rows, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("f{j}")).collect()
    }

    fn with_missing(col: &[Option<f64>]) -> FeatureMatrix {
        let n = col.len();
        FeatureMatrix::new(
            names(1),
            vec![ColumnType::Numeric],
            col.iter().map(|v| v.unwrap_or(0.0)).collect(),
            col.iter().map(|v| v.is_some()).collect(),
            vec![false; n],
            (0..n).map(|i| format!("r{i}")).collect(),
        )
        .unwrap()
    }

    fn categorical(levels: &[&str], codes: &[Option<f64>]) -> FeatureMatrix {
        let n = codes.len();
        FeatureMatrix::new(
            names(1),
            vec![ColumnType::Categorical { levels: levels.iter().map(|s| s.to_string()).collect() }],
            codes.iter().map(|v| v.unwrap_or(0.0)).collect(),
            codes.iter().map(|v| v.is_some()).collect(),
            vec![false; n],
            (0..n).map(|i| format!("r{i}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn median_imputation_conventions() {
        let p = fit_impute(&with_missing(&[Some(1.0), Some(2.0), None, Some(4.0)])).unwrap();
        assert_eq!(p.columns[0].rule, ImputeRule::Median(2.0));
        let p = fit_impute(&with_missing(&[Some(1.0), Some(2.0), Some(3.0), Some(4.0)])).unwrap();
        assert_eq!(p.columns[0].rule, ImputeRule::Median(2.5));
    }

    #[test]
    fn mode_imputation_and_ties() {
        let p = fit_impute(&categorical(&["a", "b"], &[Some(0.0), Some(0.0), Some(1.0), None])).unwrap();
        assert_eq!(p.columns[0].rule, ImputeRule::Mode { category: "a".to_string(), code: 0.0 });
        // first-appearance order puts "z" first, but a tie breaks lexicographically
        let p = fit_impute(&categorical(&["z", "b"], &[Some(0.0), Some(1.0)])).unwrap();
        assert_eq!(p.columns[0].rule, ImputeRule::Mode { category: "b".to_string(), code: 1.0 });
    }

    #[test]
    fn fully_missing_column_is_named() {
        assert_eq!(fit_impute(&with_missing(&[None, None])), Err(Error::EmptyColumn("f0".to_string())));
    }

    #[test]
    fn impute_uses_train_parameters() {
        let train = with_missing(&[Some(1.0), Some(2.0), Some(3.0)]);
        let params = fit_impute(&train).unwrap();
        let test = with_missing(&[Some(5.0), None]);
        let out = apply_impute(&test, &params).unwrap();
        assert_eq!(out.value(0, 0), 5.0);
        assert_eq!(out.value(1, 0), 2.0);
        assert!(out.is_fully_observed());
        let observed = with_missing(&[Some(1.0), Some(7.0)]);
        assert_eq!(apply_impute(&observed, &params).unwrap(), observed);
    }

    #[test]
    fn impute_rejects_unknown_column() {
        let params = ImputeParams { columns: vec![] };
        assert!(matches!(apply_impute(&with_missing(&[Some(1.0)]), &params), Err(Error::UnknownColumn(_))));
    }

    #[test]
    fn scaling_examples() {
        let m = FeatureMatrix::from_rows(names(2), &[vec![2.0, 3.0], vec![4.0, 3.0], vec![6.0, 3.0]], vec![false; 3]).unwrap();
        let params = fit_scale(&m);
        let s = apply_scale(&m, &params).unwrap();
        assert_eq!(s.observed_column(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(s.observed_column(1), vec![0.0, 0.0, 0.0]);
        let train = FeatureMatrix::from_rows(names(1), &[vec![0.0], vec![10.0]], vec![false; 2]).unwrap();
        let test = FeatureMatrix::from_rows(names(1), &[vec![12.0], vec![-3.0]], vec![false; 2]).unwrap();
        let s = apply_scale(&test, &fit_scale(&train)).unwrap();
        assert_eq!(s.observed_column(0), vec![1.0, 0.0]);
    }

    #[test]
    fn label_encoding_examples() {
        let levels = fit_levels([Some("Medicare"), Some("Private"), Some("Medicare")]);
        assert_eq!(levels, vec!["Medicare".to_string(), "Private".to_string()]);
        let codes = encode_levels(&levels, [Some("Medicare"), Some("Private"), Some("Medicare"), Some("SelfPay"), None]);
        assert_eq!(codes, vec![Some(0.0), Some(1.0), Some(0.0), Some(-1.0), None]);
        let single = fit_levels([Some("x"), Some("x")]);
        assert_eq!(encode_levels(&single, [Some("x"), Some("x")]), vec![Some(0.0), Some(0.0)]);
    }

    #[test]
    fn split_small_example() {
        let labels: Vec<bool> = (0..10).map(|i| i < 5).collect();
        let s = stratified_split(&labels, 0.3, 1).unwrap();
        assert_eq!(s.test_rows.len(), 3);
        assert_eq!(s.train_rows.len() + s.test_rows.len(), 10);
        let pos = s.test_rows.iter().filter(|&&i| labels[i]).count();
        assert!((1..=2).contains(&pos));
        assert_eq!(s, stratified_split(&labels, 0.3, 1).unwrap());
    }

    #[test]
    fn split_reference_sizes() {
        let labels: Vec<bool> = (0..1172).map(|i| i < 225).collect();
        let s = stratified_split(&labels, 0.3, 42).unwrap();
        assert_eq!(s.test_rows.len(), 352);
        assert_eq!(s.train_rows.len(), 820);
    }

    #[test]
    fn split_requires_two_per_class() {
        let labels = [true, false, false, false];
        assert!(matches!(stratified_split(&labels, 0.3, 0), Err(Error::ClassTooSmall { label: true, .. })));
        assert!(matches!(stratified_split(&labels, 1.0, 0), Err(Error::InvalidParam(_))));
    }
}
