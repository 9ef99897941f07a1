use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to decode image: {0}")]
    Decode(String),

    #[error("invalid image buffer: {0}")]
    InvalidImage(String),

    #[error("cannot partition {width}x{height} plane into {k1}x{k2} blocks")]
    InvalidPartition {
        width: usize,
        height: usize,
        k1: usize,
        k2: usize,
    },

    #[error("{metric}: {reason}")]
    Metric { metric: &'static str, reason: String },

    #[error("invalid metric configuration: {0}")]
    Config(String),

    #[error("empty input")]
    EmptyInput,

    #[error("every value was flagged as an outlier")]
    AllOutliers,

    #[error("metric `{0}` is constant across the pooled table (min == max)")]
    DegenerateMetric(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("q-index {0} is outside [0, 1]")]
    OutOfRange(f64),

    #[error("inconsistent table: {0}")]
    Table(String),

    #[error("records mix image ids {0} and {1}")]
    MixedImage(u64, u64),

    #[error("unknown class id {0}")]
    UnknownClass(u32),

    #[error("invalid bounding box {0:?}")]
    InvalidBox([f64; 4]),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("input has zero variance")]
    ConstantInput,

    #[error("need at least {needed} paired samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("no model id is shared between summaries and evaluations")]
    NoOverlap,

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn metric(metric: &'static str, reason: impl Into<String>) -> Self {
        Error::Metric {
            metric,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
