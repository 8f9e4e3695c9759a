#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use panc_risk::config::{RunConfig, SyntheticSource};
use panc_risk_core::cohort::CohortSpec;
use panc_risk_core::models::grid::{GbdtGrid, GridSpec, LogRegGrid};
use panc_risk_core::models::logreg::Penalty;
use panc_risk_core::pipeline::{AblationConfig, ModelEntry, PipelineConfig};

pub fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_panc-risk")).args(args).env_remove("PANC_RISK_WORKERS").output().expect("spawn panc-risk")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A reduced pipeline on a smaller reference cohort; every stage runs.
pub fn small_config(seed: u64, n: usize) -> RunConfig {
    let mut pipeline = PipelineConfig::default();
    pipeline.selection.rfecv.forest.n_estimators = 20;
    pipeline.selection.lambda_count = 12;
    pipeline.bootstrap = 100;
    pipeline.folds = 3;
    pipeline.models = vec![
        ModelEntry {
            name: "gbdt_depthwise".into(),
            grid: GridSpec::Gbdt(GbdtGrid { n_rounds: vec![40], max_depth: vec![3], ..GbdtGrid::depthwise_default() }),
        },
        ModelEntry { name: "logreg".into(), grid: GridSpec::Logreg(LogRegGrid { penalty: vec![Penalty::L2], c: vec![1.0] }) },
    ];
    pipeline.ablation = AblationConfig { repeats: 2, ..AblationConfig::default() };
    let spec = CohortSpec { n, ..CohortSpec::readmission_reference() };
    RunConfig { seed, input: None, synthetic: Some(SyntheticSource::Spec(spec)), pipeline, out: None }
}

pub fn write_config(path: &Path, cfg: &RunConfig) {
    std::fs::write(path, serde_json::to_vec_pretty(cfg).unwrap()).unwrap();
}

/// Every file under `dir`, keyed by its relative path.
pub fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

pub fn assert_same_files(a: &Path, b: &Path) {
    let (fa, fb) = (files(a), files(b));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (k, v) in &fa {
        assert!(v == &fb[k], "{k} differs between {} and {}", a.display(), b.display());
    }
}
