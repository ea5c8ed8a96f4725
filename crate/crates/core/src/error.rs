use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Variants carry enough context for the CLI to
/// report the offending file, line or column by name.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty vocabulary: no word reaches min_count {min_count}")]
    EmptyVocabulary { min_count: u64 },

    #[error("position {position} out of range for sentence of {len} tokens")]
    PositionOutOfRange { position: usize, len: usize },

    #[error("empty probability list")]
    EmptyProbabilities,

    #[error("probability {value} at position {position} outside [0,1]")]
    InvalidProbability { position: usize, value: f64 },

    #[error("zero variance in column `{0}`")]
    ZeroVariance(String),

    #[error("rank-deficient design: dependent columns {0:?}")]
    RankDeficient(Vec<String>),

    #[error("design has {n} rows but needs more than {needed} for {predictors} predictors")]
    TooFewRows {
        n: usize,
        needed: usize,
        predictors: usize,
    },

    #[error("measures reference words without predictor rows: {0:?}")]
    JoinMismatch(Vec<String>),

    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown configuration key `{key}` at {path}:{line}")]
    UnknownConfigKey {
        path: PathBuf,
        line: usize,
        key: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: corrupt model file at byte {offset}: {message}")]
    ModelFormat {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("{path}: model format version {found}, expected {expected}")]
    ModelVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
