//! Case files, reports and the toy scenarios behind the `opf-decomp` binary.

pub mod json;
pub mod matpower;
pub mod output;
pub mod toys;
pub mod units;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("malformed case file: {0}")]
    MalformedCase(String),
    #[error("generator {gen}: unsupported cost: {reason}")]
    UnsupportedCostModel { gen: usize, reason: String },
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error(transparent)]
    Network(#[from] opf_decomp_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
}

pub type IoResult<T> = Result<T, IoError>;
