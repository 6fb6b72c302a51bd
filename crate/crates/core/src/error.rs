use thiserror::Error;

pub type Result<T> = std::result::Result<T, LcpError>;

#[derive(Debug, Error)]
pub enum LcpError {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension {n} exceeds the enumeration cap of {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("complementarity violated: z'w = {gap:e} exceeds tolerance")]
    ComplementarityViolation { gap: f64 },

    #[error("negative entry {value:e} in {what}")]
    Negative { what: &'static str, value: f64 },

    #[error("generator column {column} of -M is zero; its direction is undefined")]
    ZeroGenerator { column: usize },

    #[error("index set {alpha} does not fit dimension {n}")]
    IndexOutOfRange { alpha: String, n: usize },

    #[error("path needs at least two waypoints")]
    EmptyPath,

    #[error("singular piece matrix in witness (piece {0})")]
    SingularPiece(usize),

    #[error("complementary matrix of {0} is singular")]
    SingularCone(String),

    #[error("no witness piece covers the point {0:?}")]
    Uncovered(Vec<f64>),

    #[error("invalid {field}: {reason}")]
    Parse { field: String, reason: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LcpError {
    pub fn parse(field: impl Into<String>, reason: impl Into<String>) -> Self {
        LcpError::Parse {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
