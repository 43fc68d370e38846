use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no rows in {0}")]
    NoRows(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-numeric value {value:?} in column `{column}` (row {row})")]
    NonNumeric {
        column: String,
        row: usize,
        value: String,
    },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("ids do not match between before/after counts: {0:?}")]
    MismatchedIds(Vec<String>),

    #[error("negative trip count for `{0}`")]
    NegativeCount(String),

    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("design matrix is rank deficient; dependent columns: {0:?}")]
    RankDeficient(Vec<String>),

    #[error("local design at location {location} (`{id}`) is rank deficient; try a larger bandwidth")]
    LocalRankDeficient { location: usize, id: String },

    #[error("singular linear system")]
    Singular,

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("table must be standardized before fitting MGWR")]
    NotStandardized,

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn at_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}
