use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("index ({row}, {col}) out of range for {rows}x{cols}")]
    Index {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("lower-triangle access ({row}, {col}); conjugate-flip to ({col}, {row}) first")]
    LowerTriangle { row: usize, col: usize },

    #[error("invalid window {p}x{q} for a {n}x{m} matrix")]
    InvalidWindow {
        p: usize,
        q: usize,
        n: usize,
        m: usize,
    },

    #[error("zero-sized matrix")]
    EmptyMatrix,

    #[error("matrix data length {got} does not match {rows}x{cols}")]
    DataLength {
        got: usize,
        rows: usize,
        cols: usize,
    },

    #[error("covariance dimension {dim} exceeds packed storage capacity")]
    Capacity { dim: usize },

    #[error("count overflow evaluating {what}")]
    Overflow { what: &'static str },

    #[error("offset ({dr}, {dc}) is not a unique combination for a {p}x{q} window")]
    NotACombination {
        dr: isize,
        dc: isize,
        p: usize,
        q: usize,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("batch matrices have mismatched shapes: {expected:?} vs {got:?}")]
    HeterogeneousBatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
