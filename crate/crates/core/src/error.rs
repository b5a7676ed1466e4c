use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("c = {0} is outside the supported range 2..=64")]
    DegreeOutOfRange(u32),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("exponential overflow evaluating level {level}; the argument leaves the representable range")]
    Overflow { level: u32 },

    #[error("level {level}: {reason} (retry with more mantissa bits)")]
    Precision { level: u32, reason: String },

    #[error("point with norm {norm} lies outside B_(2^{depth}); no tail bound is available there")]
    OutsideTailDomain { norm: String, depth: usize },

    #[error("malformed construction: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
