use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("probability matrix is empty")]
    EmptyMatrix,

    #[error(
        "probability matrix is not rectangular: row {row} has {found} entries, expected {expected}"
    )]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("negative or non-finite entry {value} at ({x}, {y})")]
    NegativeEntry { x: usize, y: usize, value: f64 },

    #[error("distribution does not sum to 1 (sum = {0})")]
    NotNormalized(f64),

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("factor shapes differ: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("projected spectrum size {projected} exceeds cap {cap}")]
    Overflow { projected: u128, cap: usize },

    #[error("epsilon {epsilon} outside [0, {limit})")]
    EpsilonOutOfRange { epsilon: f64, limit: f64 },

    #[error("spectrum is conditional; use hmax_threshold_upper or the brute-force oracle")]
    ConditionalNotSupported,

    #[error("explicit table too large: {size} atoms (cap {cap})")]
    TooLarge { size: u128, cap: u128 },

    #[error("t = {t} outside admissible range |t| <= {limit}")]
    TOutOfRange { t: f64, limit: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("alphabet size {0} too small (need at least 3)")]
    AlphabetTooSmall(usize),

    #[error("codec or seed does not match the distribution: {0}")]
    Mismatch(String),

    #[error("seed has {found} bits, expected {expected}")]
    SeedLengthMismatch { expected: usize, found: usize },

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
