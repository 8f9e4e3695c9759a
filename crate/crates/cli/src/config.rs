//! Run configuration: one JSON document, unknown keys rejected.

use std::path::{Path, PathBuf};

use panc_risk_core::cohort::CohortSpec;
use panc_risk_core::pipeline::PipelineConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub static_csv: PathBuf,
    pub events_csv: PathBuf,
}

/// A synthetic cohort: a named preset or an explicit spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SyntheticSource {
    Preset(String),
    Spec(CohortSpec),
}

impl SyntheticSource {
    pub fn resolve(&self) -> Result<CohortSpec> {
        match self {
            SyntheticSource::Preset(name) if name == "readmission_reference" => Ok(CohortSpec::readmission_reference()),
            SyntheticSource::Preset(name) => Err(CliError::Config(format!("unknown synthetic preset `{name}`"))),
            SyntheticSource::Spec(s) => Ok(s.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub input: Option<InputPaths>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSource>,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

pub enum Source {
    Extract(InputPaths),
    Synthetic(CohortSpec),
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.pipeline.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Read a config file; relative input paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|_| CliError::Config(format!("{}: not UTF-8", path.display())))?;
        let mut cfg = Self::parse(text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(input) = &mut cfg.input {
            input.static_csv = base.join(&input.static_csv);
            input.events_csv = base.join(&input.events_csv);
        }
        Ok((cfg, bytes))
    }

    /// The single cohort source. Having both or neither is a config error.
    pub fn source(&self) -> Result<Source> {
        match (&self.input, &self.synthetic) {
            (Some(i), None) => Ok(Source::Extract(i.clone())),
            (None, Some(s)) => Ok(Source::Synthetic(s.resolve()?)),
            (Some(_), Some(_)) => Err(CliError::Config("exactly one of `input` and `synthetic` may be set, found both".into())),
            (None, None) => Err(CliError::Config("exactly one of `input` and `synthetic` must be set, found neither".into())),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
