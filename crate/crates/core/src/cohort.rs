//! Patient data model, exclusion cascade, temporal aggregation and the
//! synthetic cohort generator.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::math::sqrt;
use crate::{rng, Error, Result};

/// Feature columns carried by every record ahead of the derived columns.
pub const STATIC_FEATURES: [&str; 3] = ["age", "los_hospital", "insurance"];

/// Column index of the categorical `insurance` feature.
pub const INSURANCE_COLUMN: usize = 2;

/// One time-stamped measurement from the first 24 hours of the ICU stay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEvent {
    pub patient_id: String,
    pub hour: u8,
    pub variable: String,
    pub value: f64,
}

impl RawEvent {
    pub fn new(patient_id: impl Into<String>, hour: i64, variable: impl Into<String>, value: f64) -> Result<Self> {
        let variable = variable.into();
        if !(0..=23).contains(&hour) {
            return Err(Error::InvalidRecord(format!("event hour {hour} outside 0..=23")));
        }
        if !value.is_finite() {
            return Err(Error::NonFinite);
        }
        if variable.is_empty() {
            return Err(Error::InvalidRecord("empty event variable".to_string()));
        }
        Ok(Self { patient_id: patient_id.into(), hour: hour as u8, variable, value })
    }
}

/// Static fields of one patient as they arrive in the extract.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticRow {
    pub patient_id: String,
    pub age: f64,
    pub icu_los_hours: f64,
    pub icu_stay_seq: u32,
    pub renal_history: bool,
    pub los_hospital: Option<f64>,
    pub insurance: Option<String>,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub patient_id: String,
    pub age: f64,
    pub icu_los_hours: f64,
    pub icu_stay_seq: u32,
    pub renal_history: bool,
    pub los_hospital: Option<f64>,
    pub insurance: Option<String>,
    /// Values aligned with [`Cohort::derived_names`]; `None` marks a missing cell.
    pub derived: Vec<Option<f64>>,
    /// Readmitted to the ICU within seven days.
    pub label: bool,
}

impl PatientRecord {
    fn validate(&self) -> Result<()> {
        if !(self.age >= 0.0) || !self.age.is_finite() {
            return Err(Error::InvalidRecord(format!("{}: age must be >= 0", self.patient_id)));
        }
        if !(self.icu_los_hours >= 0.0) || !self.icu_los_hours.is_finite() {
            return Err(Error::InvalidRecord(format!("{}: icu_los_hours must be >= 0", self.patient_id)));
        }
        if self.icu_stay_seq < 1 {
            return Err(Error::InvalidRecord(format!("{}: icu_stay_seq must be >= 1", self.patient_id)));
        }
        if self.los_hospital.is_some_and(|v| !v.is_finite()) || self.derived.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Ingested,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// A borrowed view of one feature cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell<'a> {
    Missing,
    Number(f64),
    Category(&'a str),
}

/// An immutable, validated set of patient records.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    records: Vec<PatientRecord>,
    derived_names: Vec<String>,
    provenance: Provenance,
}

impl Cohort {
    pub fn new(records: Vec<PatientRecord>, derived_names: Vec<String>, provenance: Provenance) -> Result<Self> {
        let mut names: BTreeSet<&str> = STATIC_FEATURES.iter().copied().collect();
        for n in &derived_names {
            if !names.insert(n.as_str()) {
                return Err(Error::InvalidRecord(format!("duplicate feature name `{n}`")));
            }
        }
        let mut ids = BTreeSet::new();
        for r in &records {
            if !ids.insert(r.patient_id.as_str()) {
                return Err(Error::DuplicatePatient(r.patient_id.clone()));
            }
            if r.derived.len() != derived_names.len() {
                return Err(Error::LengthMismatch(r.derived.len(), derived_names.len()));
            }
            r.validate()?;
        }
        Ok(Self { records, derived_names, provenance })
    }

    /// Assemble a cohort from static rows and raw events, aggregating every
    /// event variable into `_min`, `_max` and `_mean` columns.
    pub fn from_extract(statics: Vec<StaticRow>, events: Vec<RawEvent>) -> Result<Self> {
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, s) in statics.iter().enumerate() {
            if index.insert(s.patient_id.as_str(), i).is_some() {
                return Err(Error::DuplicatePatient(s.patient_id.clone()));
            }
        }
        let mut grouped: Vec<Vec<&RawEvent>> = (0..statics.len()).map(|_| Vec::new()).collect();
        let mut variables = BTreeSet::new();
        for e in &events {
            let i = *index
                .get(e.patient_id.as_str())
                .ok_or_else(|| Error::UnknownPatient(e.patient_id.clone()))?;
            grouped[i].push(e);
            variables.insert(e.variable.clone());
        }
        let variables: Vec<String> = variables.into_iter().collect();
        let derived_names = aggregate_names(&variables);
        let records = statics
            .into_iter()
            .zip(grouped)
            .map(|(s, evs)| PatientRecord {
                derived: aggregate_temporal(evs.iter().copied(), &variables),
                patient_id: s.patient_id,
                age: s.age,
                icu_los_hours: s.icu_los_hours,
                icu_stay_seq: s.icu_stay_seq,
                renal_history: s.renal_history,
                los_hospital: s.los_hospital,
                insurance: s.insurance,
                label: s.label,
            })
            .collect();
        Self::new(records, derived_names, Provenance::Ingested)
    }

    pub fn records(&self) -> &[PatientRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn derived_names(&self) -> &[String] {
        &self.derived_names
    }

    /// All feature names: the static features followed by the derived columns.
    pub fn feature_names(&self) -> Vec<String> {
        STATIC_FEATURES
            .iter()
            .map(|s| s.to_string())
            .chain(self.derived_names.iter().cloned())
            .collect()
    }

    pub fn feature_kind(&self, column: usize) -> ColumnKind {
        if column == INSURANCE_COLUMN {
            ColumnKind::Categorical
        } else {
            ColumnKind::Numeric
        }
    }

    pub fn n_features(&self) -> usize {
        STATIC_FEATURES.len() + self.derived_names.len()
    }

    pub fn cell(&self, row: usize, column: usize) -> Cell<'_> {
        let r = &self.records[row];
        match column {
            0 => Cell::Number(r.age),
            1 => r.los_hospital.map_or(Cell::Missing, Cell::Number),
            2 => r.insurance.as_deref().map_or(Cell::Missing, Cell::Category),
            j => r.derived[j - STATIC_FEATURES.len()].map_or(Cell::Missing, Cell::Number),
        }
    }

    pub fn labels(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.label).collect()
    }

    fn with_records(&self, records: Vec<PatientRecord>) -> Self {
        Self { records, derived_names: self.derived_names.clone(), provenance: self.provenance }
    }
}

/// Derived column names for a list of event variables.
pub fn aggregate_names(variables: &[String]) -> Vec<String> {
    variables
        .iter()
        .flat_map(|v| [format!("{v}_min"), format!("{v}_max"), format!("{v}_mean")])
        .collect()
}

/// Per-variable min, max and mean over one patient's observations, laid out
/// as `[v0_min, v0_max, v0_mean, v1_min, ...]`. Variables without
/// observations yield missing cells.
pub fn aggregate_temporal<'a>(events: impl IntoIterator<Item = &'a RawEvent>, variables: &[String]) -> Vec<Option<f64>> {
    // (min, max, sum, count)
    let mut acc: Vec<(f64, f64, f64, usize)> = alloc::vec![(f64::INFINITY, f64::NEG_INFINITY, 0.0, 0); variables.len()];
    for e in events {
        if let Ok(k) = variables.binary_search_by(|v| v.as_str().cmp(e.variable.as_str())) {
            let a = &mut acc[k];
            a.0 = a.0.min(e.value);
            a.1 = a.1.max(e.value);
            a.2 += e.value;
            a.3 += 1;
        }
    }
    acc.iter()
        .flat_map(|&(lo, hi, sum, count)| {
            if count == 0 {
                [None, None, None]
            } else {
                // mean clamped into [min, max] against rounding in the sum
                let mean = (sum / count as f64).clamp(lo, hi);
                [Some(lo), Some(hi), Some(mean)]
            }
        })
        .collect()
}

/// Per-rule removal counts in application order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExclusionLog {
    pub entries: Vec<(String, usize)>,
}

impl ExclusionLog {
    pub fn total_removed(&self) -> usize {
        self.entries.iter().map(|(_, c)| c).sum()
    }
}

impl Serialize for ExclusionLog {
    fn serialize<S: Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.entries.len()))?;
        for (rule, count) in &self.entries {
            map.serialize_entry(rule, count)?;
        }
        map.end()
    }
}

type Rule = (&'static str, fn(&PatientRecord) -> bool);

const EXCLUSION_RULES: [Rule; 4] = [
    ("age_under_18", |r| r.age < 18.0),
    ("icu_stay_under_24h", |r| r.icu_los_hours < 24.0),
    ("renal_history", |r| r.renal_history),
    ("repeat_icu_stay", |r| r.icu_stay_seq > 1),
];

/// Apply the exclusion cascade. A record matching several rules is counted
/// under the first one only.
pub fn apply_exclusions(cohort: &Cohort) -> (Cohort, ExclusionLog) {
    let mut counts = [0usize; EXCLUSION_RULES.len()];
    let mut kept = Vec::with_capacity(cohort.len());
    for r in cohort.records() {
        match EXCLUSION_RULES.iter().position(|(_, rule)| rule(r)) {
            Some(k) => counts[k] += 1,
            None => kept.push(r.clone()),
        }
    }
    let log = ExclusionLog {
        entries: EXCLUSION_RULES.iter().zip(counts).map(|((name, _), c)| (name.to_string(), c)).collect(),
    };
    (cohort.with_records(kept), log)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
}

/// Class-conditional moments of one generated feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub name: String,
    /// Non-readmitted class.
    pub negative: Moments,
    /// Readmitted class.
    pub positive: Moments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipBound {
    pub feature: String,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

/// Parameters of the synthetic cohort generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortSpec {
    pub features: Vec<FeatureSpec>,
    pub prevalence: f64,
    pub n: usize,
    /// Weight in `[0, 1]` of the latent factor shared by all signal features.
    pub correlation_strength: f64,
    pub noise_feature_count: usize,
    #[serde(default)]
    pub clip: Vec<ClipBound>,
    #[serde(default = "default_insurance_levels")]
    pub insurance_levels: Vec<String>,
}

fn default_insurance_levels() -> Vec<String> {
    ["Medicare", "Private", "Medicaid", "Government", "Self Pay"].iter().map(|s| s.to_string()).collect()
}

// (name, non-readmitted mean, sd, readmitted mean, sd)
const READMISSION_TABLE: [(&str, f64, f64, f64, f64); 20] = [
    ("ptt_max", 39.01, 22.24, 41.84, 23.31),
    ("heart_rate_mean", 95.76, 18.57, 97.96, 17.14),
    ("chloride_max", 106.45, 6.72, 105.14, 6.74),
    ("los_hospital", 18.71, 20.08, 23.08, 22.64),
    ("resp_rate_mean", 21.02, 4.60, 20.11, 4.58),
    ("total_urine_output", 59907.84, 103857.30, 92989.04, 162845.67),
    ("bilirubin_total_max", 2.90, 4.82, 2.11, 2.94),
    ("alp_max", 151.04, 123.24, 216.73, 294.88),
    ("ast_max", 455.82, 1936.54, 235.17, 381.16),
    ("calcium_max", 8.37, 0.89, 8.61, 0.96),
    ("hematocrit_max", 35.22, 7.27, 33.32, 7.27),
    ("dbp_mean", 68.92, 13.52, 65.78, 10.77),
    ("age", 57.20, 17.10, 51.52, 18.61),
    ("alt_max", 243.51, 870.07, 127.55, 138.39),
    ("mbp_mean", 82.71, 13.37, 78.52, 11.10),
    ("hemoglobin_max", 11.63, 2.54, 10.76, 2.54),
    ("sbp_mean", 122.23, 18.15, 115.92, 15.40),
    ("bicarbonate_max", 24.03, 4.55, 26.14, 6.41),
    ("spo2_mean", 96.26, 2.25, 97.15, 2.08),
    ("platelets_max", 250.31, 147.89, 384.87, 260.48),
];

impl CohortSpec {
    /// Readmitted vs non-readmitted moments of the twenty retained features
    /// of the reference acute-pancreatitis cohort (1,172 patients, 225
    /// readmitted), with physiologic clip bounds and five noise features.
    pub fn readmission_reference() -> Self {
        let features = READMISSION_TABLE
            .iter()
            .map(|&(name, m0, s0, m1, s1)| FeatureSpec {
                name: name.to_string(),
                negative: Moments { mean: m0, sd: s0 },
                positive: Moments { mean: m1, sd: s1 },
            })
            .collect();
        let mut clip: Vec<ClipBound> = READMISSION_TABLE
            .iter()
            .map(|&(name, ..)| ClipBound { feature: name.to_string(), min: Some(0.0), max: None })
            .collect();
        for c in &mut clip {
            match c.feature.as_str() {
                "age" => {
                    c.min = Some(18.0);
                    c.max = Some(100.0);
                }
                "los_hospital" => c.min = Some(1.0),
                "spo2_mean" => c.max = Some(100.0),
                _ => {}
            }
        }
        Self {
            features,
            prevalence: 225.0 / 1172.0,
            n: 1172,
            correlation_strength: 0.3,
            noise_feature_count: 5,
            clip,
            insurance_levels: default_insurance_levels(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return Err(Error::InvalidSpec(format!("prevalence {} outside (0, 1)", self.prevalence)));
        }
        if !(0.0..=1.0).contains(&self.correlation_strength) {
            return Err(Error::InvalidSpec("correlation_strength outside [0, 1]".to_string()));
        }
        if self.prevalence * (self.n as f64) < 2.0 {
            return Err(Error::InvalidSpec(format!(
                "prevalence * n = {} < 2: cannot stratify",
                self.prevalence * self.n as f64
            )));
        }
        let mut seen = BTreeSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::InvalidSpec(format!("duplicate feature `{}`", f.name)));
            }
            if f.name == "insurance" {
                return Err(Error::InvalidSpec("`insurance` is categorical and cannot be generated as numeric".to_string()));
            }
            for m in [f.negative, f.positive] {
                if !(m.sd > 0.0) || !m.mean.is_finite() || !m.sd.is_finite() {
                    return Err(Error::InvalidSpec(format!("feature `{}` needs finite mean and sd > 0", f.name)));
                }
            }
        }
        for k in 1..=self.noise_feature_count {
            if seen.contains(noise_name(k).as_str()) {
                return Err(Error::InvalidSpec(format!("feature name `{}` is reserved for noise", noise_name(k))));
            }
        }
        if self.insurance_levels.is_empty() {
            return Err(Error::InvalidSpec("insurance_levels must be non-empty".to_string()));
        }
        Ok(())
    }

    fn bounds(&self, name: &str) -> (f64, f64) {
        self.clip
            .iter()
            .find(|c| c.feature == name)
            .map_or((f64::NEG_INFINITY, f64::INFINITY), |c| {
                (c.min.unwrap_or(f64::NEG_INFINITY), c.max.unwrap_or(f64::INFINITY))
            })
    }

    /// Names of the generated noise columns.
    pub fn noise_names(&self) -> Vec<String> {
        (1..=self.noise_feature_count).map(noise_name).collect()
    }
}

fn noise_name(k: usize) -> String {
    format!("noise_{k}")
}

/// Draw a synthetic cohort. Each signal feature is
/// `mean_c + sd_c * (sqrt(rho) * L + sqrt(1 - rho) * e)` for the record's class
/// `c`, a latent factor `L` shared by the record's features and independent
/// noise `e`, then clipped. Noise features are class-independent standard
/// normals. `age` and `los_hospital` fill the static fields when present.
pub fn generate_synthetic(spec: &CohortSpec, seed: u64) -> Result<Cohort> {
    spec.validate()?;
    let mut rng = rng::stream(seed, "synthetic-cohort", &[]);
    let shared = sqrt(spec.correlation_strength);
    let own = sqrt(1.0 - spec.correlation_strength);
    let age_idx = spec.features.iter().position(|f| f.name == "age");
    let los_idx = spec.features.iter().position(|f| f.name == "los_hospital");
    let derived_idx: Vec<usize> = (0..spec.features.len()).filter(|&j| Some(j) != age_idx && Some(j) != los_idx).collect();
    let mut derived_names: Vec<String> = derived_idx.iter().map(|&j| spec.features[j].name.clone()).collect();
    derived_names.extend(spec.noise_names());
    let bounds: Vec<(f64, f64)> = spec.features.iter().map(|f| spec.bounds(&f.name)).collect();
    let width = digits(spec.n);

    let mut records = Vec::with_capacity(spec.n);
    let mut values = alloc::vec![0.0; spec.features.len()];
    for i in 0..spec.n {
        let label = rng.random::<f64>() < spec.prevalence;
        let latent: f64 = StandardNormal.sample(&mut rng);
        for (j, f) in spec.features.iter().enumerate() {
            let e: f64 = StandardNormal.sample(&mut rng);
            let m = if label { f.positive } else { f.negative };
            let (lo, hi) = bounds[j];
            values[j] = (m.mean + m.sd * (shared * latent + own * e)).clamp(lo, hi);
        }
        let mut derived: Vec<Option<f64>> = derived_idx.iter().map(|&j| Some(values[j])).collect();
        for _ in 0..spec.noise_feature_count {
            let z: f64 = StandardNormal.sample(&mut rng);
            derived.push(Some(z));
        }
        let insurance = spec.insurance_levels[rng.random_range(0..spec.insurance_levels.len())].clone();
        let icu_los_hours = 24.0 + 312.0 * rng.random::<f64>();
        records.push(PatientRecord {
            patient_id: format!("syn-{i:0width$}"),
            age: age_idx.map_or(50.0, |j| values[j]),
            icu_los_hours,
            icu_stay_seq: 1,
            renal_history: false,
            los_hospital: los_idx.map(|j| values[j]),
            insurance: Some(insurance),
            derived,
            label,
        });
    }
    Cohort::new(records, derived_names, Provenance::Synthetic)
}

fn digits(mut n: usize) -> usize {
    let mut d = 1;
    while n >= 10 {
        n /= 10;
        d += 1;
    }
    d.max(5)
}
