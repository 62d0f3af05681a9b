use thiserror::Error;

/// Errors raised by the statistical routines and data model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("non-finite value in column `{column}` at row {row}")]
    NonFiniteValue { column: String, row: usize },
    #[error("non-binary value in column `{column}` at row {row}: expected 0 or 1")]
    NonBinaryLabel { column: String, row: usize },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown null model `{0}`")]
    UnknownNullModel(String),
    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("empty sample")]
    EmptySample,
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),
    #[error("all points are identical; statistic undefined")]
    DegeneratePoints,
    #[error("kernel bandwidth undefined: all pairwise distances are zero")]
    BandwidthUndefined,
    #[error("histogram bin {bin} is empty in the reference distribution and smoothing is disabled")]
    UnsmoothedZeroBin { bin: usize },
    #[error("statistic failed on permutation {index}: {message}")]
    StatisticFailure { index: usize, message: String },
    #[error("missing column with role `{0}`")]
    MissingColumn(String),
    #[error("metric {metric} undefined: zero denominator")]
    UndefinedMetric { metric: String },
    #[error("no conjunction meets the minimum support of {min_support} rows in both windows")]
    NoFeasibleSubgroup { min_support: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
