use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("dimension must be 1, 2 or 3 (got {0})")]
    Dimension(usize),
    #[error("n must be even (got {0})")]
    OddSize(usize),
    #[error("n must be at least 8 (got {0})")]
    TooSmall(usize),
    #[error("length must be positive and finite (got {0})")]
    Length(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("alpha must lie in (0, 2) (got {0})")]
    Alpha(f64),
    #[error("k1 = 0 modes of the fractional Laplacian do not vanish (relative size {0:.3e})")]
    NotAdmissible(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SnapshotError {
    #[error("i/o error on {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("malformed snapshot: {0}")]
    Format(String),
}
