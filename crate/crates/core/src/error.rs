use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix entries must be finite")]
    NonFinite,

    #[error("rank {rank} out of range for a {rows}x{cols} matrix")]
    RankOutOfRange {
        rank: usize,
        rows: usize,
        cols: usize,
    },

    #[error("rank must be at least 2 to propose new directions")]
    RankTooSmall,

    #[error("first operand must be diagonal with a strictly positive diagonal")]
    NotDiagonalPositive,

    #[error("active-set iteration cap exceeded after {0} swaps; numerical breakdown")]
    IterationCap(usize),

    #[error("selected directions are numerically collinear; reduce k")]
    CollinearDirections,

    #[error("k = {k} out of range (expected 1..={max})")]
    KOutOfRange { k: usize, max: usize },

    #[error("input matrix is identically zero")]
    ZeroMatrix,

    #[error("initialization factors are all zero")]
    AllZeroInit,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("negative entry {value} at ({row}, {col}); input must be nonnegative")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
