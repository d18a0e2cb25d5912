use thiserror::Error;

/// Errors raised by ingestion, scheduling and auditing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("switches: a chain needs at least 2 switches, got {0}")]
    TooFewSwitches(u32),

    #[error("stream {id:?}: {field} = {value} is outside [1, {switches}]")]
    SwitchOutOfRange {
        id: String,
        field: &'static str,
        value: u32,
        switches: u32,
    },

    #[error("stream {id:?}: src_switch and dst_switch are both {switch}")]
    SameEndpoints { id: String, switch: u32 },

    #[error("stream {id:?}: period must be positive")]
    ZeroPeriod { id: String },

    #[error("stream {id:?}: period {period} is not a power of two")]
    NotPowerOfTwo { id: String, period: u64 },

    #[error("stream {id:?}: period {period} exceeds the supported maximum 2^{max_exponent}")]
    PeriodTooLarge {
        id: String,
        period: u64,
        max_exponent: u32,
    },

    #[error("stream id {0:?} appears more than once")]
    DuplicateStreamId(String),

    #[error("stream {id:?}: endpoints a = {a}, b = {b} do not satisfy a < b <= {switches}")]
    BadNormalizedStream {
        id: String,
        a: u32,
        b: u32,
        switches: u32,
    },

    #[error("level {level} is above the top level {k_star}")]
    LevelOutOfRange { level: u32, k_star: u32 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("schedule does not match instance: {0}")]
    SchemaMismatch(String),

    #[error("node budget must be positive")]
    InvalidBudget,

    #[error(
        "rejection sampling exhausted after {attempts} attempts ({placed} of {requested} streams placed)"
    )]
    GenerationExhausted {
        attempts: u64,
        placed: usize,
        requested: usize,
    },

    #[error("invalid generator spec: {0}")]
    InvalidGenSpec(String),

    #[error("unsupported format {0:?}")]
    UnsupportedFormat(String),

    #[error("unsupported format_version {0}")]
    UnsupportedFormatVersion(u32),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
