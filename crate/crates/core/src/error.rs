use thiserror::Error;

use crate::tensor::SymmetryTag;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("tensor must hold n^4 = {expected} entries, got {found}")]
    EntryCount { expected: usize, found: usize },

    #[error("non-finite value encountered")]
    NonFinite,

    #[error("invalid permutation {0:?}: must be a bijection on 1..=4")]
    InvalidPermutation([usize; 4]),

    #[error("invalid mode pair ({0}, {1}): modes must be distinct and in 1..=4")]
    InvalidModePair(usize, usize),

    #[error("matrix of shape {rows}x{cols} is not an n^2 x n^2 unfolding")]
    NotSquareOfSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: deviation {deviation:.3e} exceeds {allowed:.3e}")]
    NotHermitian { deviation: f64, allowed: f64 },

    #[error("expected a {expected} tensor, found {found}: {violated}")]
    Symmetry {
        expected: &'static str,
        found: SymmetryTag,
        violated: String,
    },

    #[error("threshold must be nonnegative, got {0}")]
    NegativeThreshold(f64),

    #[error("tensor is not rank-one: measured unfolding rank {rank}")]
    NotRankOne { rank: usize },

    #[error("operation undefined for the zero tensor")]
    ZeroTensor,

    #[error(
        "observation mask is not closed under the partial-symmetry group: {0} missing indices"
    )]
    MaskNotClosed(usize),

    #[error("observed tensor has a nonzero entry outside the mask at {0:?}")]
    UnmaskedData([usize; 4]),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible instance: {0}")]
    Infeasible(String),

    #[error("degenerate iterate: {0}")]
    Degenerate(&'static str),

    #[error("step-size search failed after {0} doublings")]
    StepSearch(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
