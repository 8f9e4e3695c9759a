use std::path::PathBuf;

use panc_risk_core::pipeline::StageError;

/// Process exit codes.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{file}:{line}: column `{column}`: {message}")]
    Parse { file: PathBuf, line: u64, column: String, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("missing stage input `{0}`; run the producing stage first")]
    MissingInput(PathBuf),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error("{0}")]
    Core(#[from] panc_risk_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Parse { .. } | CliError::Io { .. } | CliError::MissingInput(_) | CliError::Format { .. } => EXIT_DATA,
            CliError::Stage(e) => core_code(&e.error),
            CliError::Core(e) => core_code(e),
        }
    }
}

fn core_code(e: &panc_risk_core::Error) -> i32 {
    if e.is_config_error() {
        EXIT_CONFIG
    } else if e.is_data_error() {
        EXIT_DATA
    } else {
        EXIT_NUMERIC
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
