mod common;

use std::path::Path;

use common::{assert_same_files, files, run, small_config, stderr, write_config};
use panc_risk::config::{InputPaths, RunConfig};
use panc_risk::io::{cohort_csv, read_cohort};
use panc_risk_core::cohort::{generate_synthetic, CohortSpec};
use tempfile::tempdir;

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const STATIC: &str = "patient_id,age,icu_los_hours,icu_stay_seq,renal_history,los_hospital,insurance,label\n\
p1,64,72,1,0,9.5,Medicare,1\n\
p2,45,30,1,0,,Private,0\n\
p3,17,50,1,0,3,Medicaid,0\n";
const EVENTS: &str = "patient_id,hour,variable,value\np1,0,heart_rate,100\np1,5,heart_rate,120\np1,9,heart_rate,110\np2,3,heart_rate,90\n";

fn extract_config(dir: &Path, static_csv: &str, events_csv: &str) -> std::path::PathBuf {
    std::fs::write(dir.join("static.csv"), static_csv).unwrap();
    std::fs::write(dir.join("events.csv"), events_csv).unwrap();
    let cfg = RunConfig {
        seed: 1,
        input: Some(InputPaths { static_csv: "static.csv".into(), events_csv: "events.csv".into() }),
        synthetic: None,
        pipeline: Default::default(),
        out: Some("out".into()),
    };
    let path = dir.join("config.json");
    write_config(&path, &cfg);
    path
}

#[test]
fn ingest_writes_flat_cohort() {
    let dir = tempdir().unwrap();
    let cfg = extract_config(dir.path(), STATIC, EVENTS);
    let o = run(&["ingest", "--config", s(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("out/cohort.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "patient_id,provenance,icu_los_hours,icu_stay_seq,renal_history,label,age,los_hospital,insurance,heart_rate_min,heart_rate_max,heart_rate_mean"
    );
    assert_eq!(lines.next().unwrap(), "p1,ingested,72,1,0,1,64,9.5,Medicare,100,120,110");
    assert_eq!(lines.next().unwrap(), "p2,ingested,30,1,0,0,45,,Private,90,90,90");
    assert!(dir.path().join("out/manifest.json").exists());
}

#[test]
fn malformed_extract_names_file_line_and_column() {
    let dir = tempdir().unwrap();
    let bad = STATIC.replace("p2,45,", "p2,forty,");
    let cfg = extract_config(dir.path(), &bad, EVENTS);
    let o = run(&["ingest", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("static.csv:3: column `age`"), "{err}");
    assert!(!dir.path().join("out/cohort.csv").exists());

    let cfg = extract_config(dir.path(), STATIC, "patient_id,hour,variable,value\np1,30,heart_rate,100\n");
    let o = run(&["ingest", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("events.csv:2: column `hour`"), "{}", stderr(&o));

    let dup = format!("{STATIC}p1,70,40,1,0,2,Medicare,0\n");
    let cfg = extract_config(dir.path(), &dup, EVENTS);
    let o = run(&["ingest", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("duplicate patient id `p1`"));
}

#[test]
fn cohort_csv_round_trips() {
    let dir = tempdir().unwrap();
    let spec = CohortSpec { n: 200, ..CohortSpec::readmission_reference() };
    let cohort = generate_synthetic(&spec, 3).unwrap();
    let path = dir.path().join("cohort.csv");
    std::fs::write(&path, cohort_csv(&cohort)).unwrap();
    let back = read_cohort(&path).unwrap();
    assert_eq!(back.records(), cohort.records());
    assert_eq!(back.derived_names(), cohort.derived_names());
    assert_eq!(cohort_csv(&back), cohort_csv(&cohort));
}

#[test]
fn config_must_name_exactly_one_source() {
    let dir = tempdir().unwrap();
    let cfg = extract_config(dir.path(), STATIC, EVENTS);
    let mut both: serde_json::Value = serde_json::from_slice(&std::fs::read(&cfg).unwrap()).unwrap();
    both["synthetic"] = "readmission_reference".into();
    std::fs::write(&cfg, serde_json::to_vec(&both).unwrap()).unwrap();
    let o = run(&["run", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("found both"));
    assert!(!dir.path().join("out").exists());

    std::fs::write(&cfg, r#"{"seed": 1, "out": "out"}"#).unwrap();
    let o = run(&["synth", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("found neither"));
}

#[test]
fn invalid_configs_exit_with_config_code() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    for text in [
        r#"{"seed": 1, "synthetic": "readmission_reference", "out": "o", "typo": 1}"#,
        r#"{"seed": 1, "synthetic": "no_such_preset", "out": "o"}"#,
        r#"{"seed": 1, "synthetic": "readmission_reference", "out": "o", "pipeline": {"folds": 1}}"#,
        r#"{"seed": 1, "synthetic": "readmission_reference"}"#,
    ] {
        std::fs::write(&cfg, text).unwrap();
        let o = run(&["synth", "--config", s(&cfg)]);
        assert_eq!(o.status.code(), Some(2), "{text}: {}", stderr(&o));
    }
    let o = run(&["synth", "--config", s(&dir.path().join("absent.json"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_prints_usage() {
    let o = run(&["frobnicate"]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn stage_without_inputs_reports_missing_file() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write_config(&cfg, &RunConfig { out: Some("out".into()), ..small_config(1, 300) });
    let o = run(&["train", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("train_matrix.json"), "{}", stderr(&o));
}

#[test]
fn stages_compose_to_run() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write_config(&cfg, &small_config(5, 400));
    let out = |name: &str| dir.path().join(name);

    let o = run(&["run", "--config", s(&cfg), "--out", s(&out("inline")), "--workers", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let o = run(&["synth", "--config", s(&cfg), "--out", s(&out("synth"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cohort = out("synth").join("cohort.csv");
    let o = run(&["run", "--config", s(&cfg), "--out", s(&out("from_cohort")), "--from-cohort", s(&cohort), "--workers", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let staged = out("staged");
    for stage in ["synth", "select", "train", "evaluate", "explain", "ablate"] {
        let o = run(&[stage, "--config", s(&cfg), "--out", s(&staged), "--workers", "3"]);
        assert!(o.status.success(), "{stage}: {}", stderr(&o));
    }

    assert_same_files(&out("inline"), &out("from_cohort"));
    assert_same_files(&out("inline"), &staged);

    let produced = files(&staged);
    for f in [
        "cohort.csv",
        "selection.json",
        "rfecv_curve.csv",
        "models/gbdt_depthwise.json",
        "metrics_logreg.json",
        "roc_gbdt_depthwise.csv",
        "calibration_gbdt_depthwise.csv",
        "shap_summary.csv",
        "stats_split.csv",
        "stats_outcome.csv",
        "ablation.csv",
        "plots/shap_summary.svg",
        "plots/roc_gbdt_depthwise.svg",
        "manifest.json",
    ] {
        assert!(produced.contains_key(f), "missing {f}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&produced["manifest.json"]).unwrap();
    assert_eq!(manifest["files"].as_array().unwrap().len(), produced.len() - 1);

    // replaying a stage leaves the bundle unchanged
    let o = run(&["evaluate", "--config", s(&cfg), "--out", s(&staged)]);
    assert!(o.status.success());
    assert_same_files(&out("inline"), &staged);
}

#[test]
fn seed_override_changes_output() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write_config(&cfg, &small_config(5, 300));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&["synth", "--config", s(&cfg), "--out", s(&a)]).status.success());
    assert!(run(&["synth", "--config", s(&cfg), "--out", s(&b), "--seed", "6"]).status.success());
    assert_ne!(std::fs::read(a.join("cohort.csv")).unwrap(), std::fs::read(b.join("cohort.csv")).unwrap());
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 6);
}
