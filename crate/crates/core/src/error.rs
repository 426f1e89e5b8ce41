use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("unknown variable id {0}")]
    UnknownVariable(usize),
    #[error("variable {0} appears more than once in a constraint")]
    DuplicateTerm(String),
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("invalid bounds [{lower}, {upper}] for variable {name}")]
    InvalidBounds {
        name: String,
        lower: f64,
        upper: f64,
    },
    #[error("indicator variable {0} is not binary")]
    NotBinary(String),
}

/// Schema or invariant violation in a model file, instance or dataset.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("{field}: expected length {expected}, found {found}")]
    DimensionMismatch {
        field: String,
        expected: usize,
        found: usize,
    },
    #[error("{0}: value is not finite")]
    NonFinite(String),
    #[error("{field}: invalid bounds [{lower}, {upper}]")]
    InvalidBounds {
        field: String,
        lower: f64,
        upper: f64,
    },
    #[error("{0}")]
    InvalidInstance(String),
    #[error("dataset: {0}")]
    Dataset(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("numerical breakdown: {0}")]
    Numerical(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodingError {
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("bound tightening for {what} ended {status}")]
    Tightening { what: String, status: String },
    #[error("negated prediction already attached")]
    AlreadyNegated,
    #[error("negated prediction not attached")]
    NotNegated,
    #[error("class index {class} out of range for {classes} classes")]
    ClassOutOfRange { class: usize, classes: usize },
    #[error("bounds do not match the network: {0}")]
    BoundsMismatch(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplainError {
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("prediction margin {margin:e} is below {tolerance:e}; strict entailment cannot be certified")]
    TieMargin { margin: f64, tolerance: f64 },
    #[error("encoding was built for class {encoded} but the instance predicts {predicted}")]
    ClassMismatch { encoded: usize, predicted: usize },
    #[error("brute-force oracle supports at most {limit} hidden neurons, network has {found}")]
    TooLarge { limit: usize, found: usize },
    #[error("feature index {0} out of range")]
    FeatureOutOfRange(usize),
    #[error("oracle LP failed: {0}")]
    Oracle(String),
}

impl From<MilpError> for ExplainError {
    fn from(e: MilpError) -> Self {
        ExplainError::Encoding(EncodingError::Milp(e))
    }
}
