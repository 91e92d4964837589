use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("row {row} of the channel table sums to {sum} (or holds entries outside [0,1])")]
    NonStochastic { row: usize, sum: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("compound channel needs at least one crossover probability")]
    EmptyCrossoverList,

    #[error("user subset {0:#b} reaches outside the allowed users")]
    SubsetOutOfRange(u32),

    #[error("value {0} outside the admissible domain")]
    DomainError(f64),

    #[error("message {message} out of range for user {user} (code holds {count} messages)")]
    MessageOutOfRange {
        user: usize,
        message: u64,
        count: u64,
    },

    #[error("code index {code} out of range for user {user}")]
    CodeOutOfRange { user: usize, code: usize },

    #[error("code index vector {0:?} is not valid for this model")]
    InvalidCodeIndex(Vec<usize>),

    #[error("D \\ S is empty; the functional is undefined there")]
    EmptyDifferenceSet,

    #[error("decoding subset must contain user 1")]
    UserOneMissing,

    #[error("operation region and operation margin overlap")]
    OverlappingMargin,

    #[error("regions do not partition the code index space: {0}")]
    NotAPartition(String),

    #[error("duplicate code index vector {0:?} in region")]
    DuplicateMember(Vec<usize>),

    #[error("no codebook for user {user}, code {code}")]
    MissingCodebook { user: usize, code: usize },

    #[error("no threshold prepared for D={d}, S={s}, g={g}")]
    MissingThreshold { d: String, s: String, g: String },

    #[error("estimate and bound were computed for different parameters: {0}")]
    MismatchedParameters(String),
}

pub type Result<T> = std::result::Result<T, Error>;
