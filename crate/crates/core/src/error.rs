use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("not a probability measure: total mass {total}, min mass {min}")]
    NotProbability { total: f64, min: f64 },

    #[error("bracket cover needs tail mass below {eps} but the stored support leaves {remaining}")]
    CoverUnreachable { eps: f64, remaining: f64 },

    #[error("bracket cover would emit 2^{core_size} brackets (limit 2^{limit})")]
    CoverTooLarge { core_size: usize, limit: usize },

    #[error("brute-force bracketing refused: support size {support} exceeds {limit}")]
    SupportTooLarge { support: usize, limit: usize },

    #[error("quadrature failed on [{lo}, {hi}]: {reason}")]
    Quadrature { lo: f64, hi: f64, reason: String },

    #[error("hypothesis gate refused the run: {0}")]
    GateRefused(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
