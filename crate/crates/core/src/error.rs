use thiserror::Error;

/// Errors shared across the raster, upscaling, sharpening, and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {detail} (expected {expected}, got {actual})")]
    DimensionMismatch {
        detail: String,
        expected: String,
        actual: String,
    },

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("no fine pixel within the truncation radius of coarse center ({x}, {y})")]
    EmptyKernel { x: f64, y: f64 },

    #[error("grids have disjoint extents: {0}")]
    DisjointExtent(String),

    #[error("objective undefined: {0}")]
    UndefinedObjective(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("search failed: {0}")]
    SearchFailed(String),

    #[error("baseline unavailable for date {date}: {detail}")]
    BaselineUnavailable { date: String, detail: String },

    #[error("date {0} not found in series")]
    DateNotFound(String),

    #[error("format error at byte {offset}: {detail}")]
    Format { offset: u64, detail: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn dimension_mismatch(
        detail: impl Into<String>,
        expected: impl std::fmt::Display,
        actual: impl std::fmt::Display,
    ) -> Self {
        Error::DimensionMismatch {
            detail: detail.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub fn format(offset: u64, detail: impl Into<String>) -> Self {
        Error::Format {
            offset,
            detail: detail.into(),
        }
    }
}
