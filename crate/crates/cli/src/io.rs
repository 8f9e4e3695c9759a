//! CSV and JSON readers and writers for extracts, cohorts and stage files.

use std::path::Path;

use panc_risk_core::cohort::{Cohort, PatientRecord, Provenance, RawEvent, StaticRow, STATIC_FEATURES};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};

pub const STATIC_HEADER: [&str; 8] =
    ["patient_id", "age", "icu_los_hours", "icu_stay_seq", "renal_history", "los_hospital", "insurance", "label"];
pub const EVENTS_HEADER: [&str; 4] = ["patient_id", "hour", "variable", "value"];
/// Bookkeeping columns of the flat cohort file, ahead of the feature columns.
pub const COHORT_LEAD: [&str; 6] = ["patient_id", "provenance", "icu_los_hours", "icu_stay_seq", "renal_history", "label"];

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::MissingInput(path.to_path_buf())
        } else {
            CliError::io(path, e)
        }
    })?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn check_header(path: &Path, reader: &mut csv::Reader<std::fs::File>, expected: &[&str]) -> Result<csv::StringRecord> {
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if !expected.is_empty() && header.iter().ne(expected.iter().copied()) {
        return Err(CliError::Parse {
            file: path.to_path_buf(),
            line: 1,
            column: "header".into(),
            message: format!("expected `{}`, found `{}`", expected.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    Ok(header)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    CliError::Parse { file: path.to_path_buf(), line, column: String::new(), message: e.to_string() }
}

/// Field accessor that reports file, line and column on failure.
struct Row<'a> {
    path: &'a Path,
    line: u64,
    header: &'a csv::StringRecord,
    record: &'a csv::StringRecord,
}

impl Row<'_> {
    fn error(&self, col: usize, message: impl Into<String>) -> CliError {
        CliError::Parse {
            file: self.path.to_path_buf(),
            line: self.line,
            column: self.header.get(col).unwrap_or("?").to_string(),
            message: message.into(),
        }
    }

    fn raw(&self, col: usize) -> &str {
        self.record.get(col).unwrap_or("")
    }

    fn text(&self, col: usize) -> Result<String> {
        let v = self.raw(col);
        if v.is_empty() {
            return Err(self.error(col, "empty value"));
        }
        Ok(v.to_string())
    }

    fn opt_text(&self, col: usize) -> Option<String> {
        let v = self.raw(col);
        (!v.is_empty()).then(|| v.to_string())
    }

    fn number(&self, col: usize) -> Result<f64> {
        self.opt_number(col)?.ok_or_else(|| self.error(col, "empty value"))
    }

    fn opt_number(&self, col: usize) -> Result<Option<f64>> {
        let v = self.raw(col);
        if v.is_empty() {
            return Ok(None);
        }
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(Some(x)),
            _ => Err(self.error(col, format!("`{v}` is not a finite number"))),
        }
    }

    fn integer<T: std::str::FromStr>(&self, col: usize) -> Result<T> {
        let v = self.raw(col);
        v.parse().map_err(|_| self.error(col, format!("`{v}` is not an integer")))
    }

    fn flag(&self, col: usize) -> Result<bool> {
        match self.raw(col) {
            "0" => Ok(false),
            "1" => Ok(true),
            v => Err(self.error(col, format!("`{v}` is not 0 or 1"))),
        }
    }
}

fn for_each_row(path: &Path, expected: &[&str], mut f: impl FnMut(&Row<'_>) -> Result<()>) -> Result<csv::StringRecord> {
    let mut reader = open(path)?;
    let header = check_header(path, &mut reader, expected)?;
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map_or(0, |p| p.line());
                if record.len() != header.len() {
                    return Err(CliError::Parse {
                        file: path.to_path_buf(),
                        line,
                        column: String::new(),
                        message: format!("expected {} fields, found {}", header.len(), record.len()),
                    });
                }
                f(&Row { path, line, header: &header, record: &record })?;
            }
            Err(e) => return Err(csv_error(path, e)),
        }
    }
    Ok(header)
}

pub fn read_static(path: &Path) -> Result<Vec<StaticRow>> {
    let mut rows = Vec::new();
    for_each_row(path, &STATIC_HEADER, |r| {
        rows.push(StaticRow {
            patient_id: r.text(0)?,
            age: r.number(1)?,
            icu_los_hours: r.number(2)?,
            icu_stay_seq: r.integer(3)?,
            renal_history: r.flag(4)?,
            los_hospital: r.opt_number(5)?,
            insurance: r.opt_text(6),
            label: r.flag(7)?,
        });
        Ok(())
    })?;
    Ok(rows)
}

pub fn read_events(path: &Path) -> Result<Vec<RawEvent>> {
    let mut events = Vec::new();
    for_each_row(path, &EVENTS_HEADER, |r| {
        let hour: i64 = r.integer(1)?;
        let event = RawEvent::new(r.text(0)?, hour, r.text(2)?, r.number(3)?).map_err(|e| r.error(1, e.to_string()))?;
        events.push(event);
        Ok(())
    })?;
    Ok(events)
}

/// Build a cohort from the static and events extracts.
pub fn ingest(static_csv: &Path, events_csv: &Path) -> Result<Cohort> {
    let statics = read_static(static_csv)?;
    let events = read_events(events_csv)?;
    Ok(Cohort::from_extract(statics, events)?)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("write to memory");
    for row in rows {
        w.write_record(&row).expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}

/// Generic CSV from a header and string rows.
pub fn to_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    csv_bytes(&header, rows)
}

/// Flat cohort export: bookkeeping columns, then every feature in
/// `feature_names` order. Missing cells are empty.
pub fn cohort_csv(cohort: &Cohort) -> Vec<u8> {
    let mut header: Vec<String> = COHORT_LEAD.iter().map(|s| s.to_string()).collect();
    header.extend(cohort.feature_names());
    let provenance = match cohort.provenance() {
        Provenance::Ingested => "ingested",
        Provenance::Synthetic => "synthetic",
    };
    let rows = cohort.records().iter().map(|r| {
        let mut row = vec![
            r.patient_id.clone(),
            provenance.to_string(),
            r.icu_los_hours.to_string(),
            r.icu_stay_seq.to_string(),
            u8::from(r.renal_history).to_string(),
            u8::from(r.label).to_string(),
            r.age.to_string(),
            fmt_opt(r.los_hospital),
            r.insurance.clone().unwrap_or_default(),
        ];
        row.extend(r.derived.iter().map(|v| fmt_opt(*v)));
        row
    });
    csv_bytes(&header, rows)
}

pub fn read_cohort(path: &Path) -> Result<Cohort> {
    let expected_lead: Vec<&str> = COHORT_LEAD.iter().chain(STATIC_FEATURES.iter()).copied().collect();
    let header = check_header(path, &mut open(path)?, &[])?;
    if header.len() < expected_lead.len() || header.iter().take(expected_lead.len()).ne(expected_lead.iter().copied()) {
        return Err(CliError::Parse {
            file: path.to_path_buf(),
            line: 1,
            column: "header".into(),
            message: format!("cohort header must start with `{}`", expected_lead.join(",")),
        });
    }
    let mut records = Vec::new();
    let mut provenance = None;
    for_each_row(path, &[], |r| {
        let prov = match r.raw(1) {
            "ingested" => Provenance::Ingested,
            "synthetic" => Provenance::Synthetic,
            v => return Err(r.error(1, format!("unknown provenance `{v}`"))),
        };
        if provenance.is_some_and(|p| p != prov) {
            return Err(r.error(1, "mixed provenance"));
        }
        provenance = Some(prov);
        let lead = COHORT_LEAD.len() + STATIC_FEATURES.len();
        records.push(PatientRecord {
            patient_id: r.text(0)?,
            icu_los_hours: r.number(2)?,
            icu_stay_seq: r.integer(3)?,
            renal_history: r.flag(4)?,
            label: r.flag(5)?,
            age: r.number(6)?,
            los_hospital: r.opt_number(7)?,
            insurance: r.opt_text(8),
            derived: (lead..r.record.len()).map(|c| r.opt_number(c)).collect::<Result<_>>()?,
        });
        Ok(())
    })?;
    let derived: Vec<String> = header.iter().skip(expected_lead.len()).map(str::to_string).collect();
    Ok(Cohort::new(records, derived, provenance.unwrap_or(Provenance::Ingested))?)
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable");
    v.push(b'\n');
    v
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::MissingInput(path.to_path_buf())
        } else {
            CliError::io(path, e)
        }
    })?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Format { path: path.to_path_buf(), message: e.to_string() })
}
