use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the core pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("duplicate patient id `{0}`")]
    DuplicatePatient(String),
    #[error("event references unknown patient `{0}`")]
    UnknownPatient(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid cohort spec: {0}")]
    InvalidSpec(String),
    #[error("column `{0}` has no observed training values")]
    EmptyColumn(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("class {label} has {count} rows, at least {needed} required")]
    ClassTooSmall { label: bool, count: usize, needed: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("labels contain a single class")]
    SingleClass,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("lambda grid too strong: every fit has all-zero coefficients")]
    GridTooStrong,
    #[error("final feature set is empty; widen the lambda grid or add forced-in features")]
    EmptySelection,
    #[error("feature schema mismatch: missing {missing:?}, extra {extra:?}")]
    SchemaMismatch { missing: Vec<String>, extra: Vec<String> },
    #[error("feature columns are in a different order than at training time")]
    FeatureOrder,
    #[error("tree node {0} has no cover data")]
    MissingCover(usize),
    #[error("brute-force Shapley enumeration supports at most 12 features, got {0}")]
    TooManyFeatures(usize),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("contingency table has a zero expected count")]
    ZeroExpected,
    #[error("all grid candidates failed: {0:?}")]
    AllCandidatesFailed(Vec<String>),
    #[error("model is untrained")]
    Untrained,
}

impl Error {
    /// Whether the error comes from the data rather than from numerics or parameters.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::DuplicatePatient(_)
                | Error::UnknownPatient(_)
                | Error::InvalidRecord(_)
                | Error::EmptyColumn(_)
                | Error::UnknownColumn(_)
                | Error::ClassTooSmall { .. }
                | Error::SingleClass
                | Error::LengthMismatch(..)
                | Error::SchemaMismatch { .. }
                | Error::FeatureOrder
        )
    }

    /// Whether the error reflects invalid configuration.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidParam(_) | Error::InvalidSpec(_))
    }
}
