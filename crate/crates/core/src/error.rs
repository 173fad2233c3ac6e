use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid capitals: {0}")]
    InvalidCapitals(String),

    #[error("invalid elimination order: {0}")]
    InvalidOrder(String),

    #[error("dimension mismatch: expected {expected} players, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("player index {index} out of range for {players} players")]
    PlayerOutOfRange { index: usize, players: usize },

    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    #[error("{engine} engine does not support k={k}, N={n} (cap {cap}); raise the cap or use the jacobi/interp engines")]
    CapExceeded {
        engine: &'static str,
        k: usize,
        n: u64,
        cap: u64,
    },

    #[error("N={n} is too small for {k} players (need N >= k)")]
    TotalTooSmall { k: usize, n: u64 },

    #[error("missing table {path}: run `ruinlab table gen --k {k} --n {n}` to create it")]
    MissingTable { path: PathBuf, k: usize, n: u64 },

    #[error("composition {0:?} is not stored in the table")]
    NotInTable(Vec<u64>),

    #[error("malformed {what}: {detail}")]
    Parse { what: &'static str, detail: String },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("rank-deficient design matrix (condition estimate {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("need at least {need} rows to fit, got {got}")]
    TooFewRows { need: usize, got: usize },

    #[error("sample count must be positive")]
    NoSamples,

    #[error("unknown betting variant `{0}`")]
    UnknownVariant(String),

    #[error("no regression model for order {0}")]
    ModelMissing(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
