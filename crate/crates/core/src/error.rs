use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("empty vector or matrix is not allowed")]
    Empty,

    /// The combined filter `S_D w` has zero energy, so the kernel BER
    /// estimate is undefined.
    #[error("degenerate receiver: filter norm w^H S^H S w is zero")]
    DegenerateFilter,

    #[error("training mode requires the transmitted symbol")]
    MissingTrainingSymbol,

    #[error("no candidate ranks to select from")]
    NoCandidates,

    #[error("receivers observed different received-vector sequences")]
    StreamMismatch,

    #[error("unsupported dimensions M = {m}, D = {d} (need 1 <= D <= M)")]
    UnsupportedDimensions { m: usize, d: usize },

    #[error("invalid value {value:?} for `{key}`: {reason}")]
    InvalidConfig {
        key: String,
        value: String,
        reason: String,
    },

    #[error("unknown preset {name:?}; valid presets: {valid}")]
    UnknownPreset { name: String, valid: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, value: impl ToString, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            value: value.to_string(),
            reason: reason.into(),
        }
    }
}
