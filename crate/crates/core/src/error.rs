use thiserror::Error;

/// Errors produced by the signature and estimation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("alphabet mismatch: {left} vs {right}")]
    AlphabetMismatch { left: usize, right: usize },

    #[error("letter {letter} outside alphabet 1..={dim}")]
    LetterOutOfRange { letter: usize, dim: usize },

    #[error("shape mismatch: expected (d={expected_dim}, K={expected_depth}), got (d={dim}, K={depth})")]
    ShapeMismatch {
        expected_dim: usize,
        expected_depth: usize,
        dim: usize,
        depth: usize,
    },

    #[error("word {word} exceeds truncation level {depth}")]
    WordTooLong { word: String, depth: usize },

    #[error("word layout for d={dim}, K={depth} overflows the index range")]
    LayoutOverflow { dim: usize, depth: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("non-finite value in path at vertex {vertex}")]
    NonFinite { vertex: usize },

    #[error("empty word is not allowed here")]
    EmptyWord,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not positive definite even with jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("simulation produced a non-finite state at step {step}")]
    SimulationDiverged { step: usize },

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("not enough samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("io: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
