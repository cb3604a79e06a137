use alloc::string::String;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: matrix has {rows} rows but vocabulary has {tokens} tokens")]
    ShapeMismatch { rows: usize, tokens: usize },

    #[error("embedding dimension must be at least 1")]
    ZeroDimension,

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("cannot unit-normalize zero-norm row for token {token:?}")]
    ZeroNorm { token: String },

    #[error("duplicate token {token:?} in vocabulary")]
    DuplicateToken { token: String },

    #[error("dictionary is empty")]
    EmptyDictionary,

    #[error("{side} index {index} out of range for vocabulary of size {len}")]
    IndexOutOfRange {
        side: &'static str,
        index: usize,
        len: usize,
    },

    #[error("SVD did not converge after {sweeps} sweeps (max relative off-diagonal {off_diagonal:e}, condition estimate {condition:e})")]
    SvdNoConvergence {
        sweeps: usize,
        off_diagonal: f64,
        condition: f64,
    },

    #[error("pair ({src:?}, {tgt:?}) has zero total frequency")]
    ZeroFrequency { src: String, tgt: String },

    #[error("re-weighting exponent {0} outside [0, 1]")]
    InvalidExponent(f64),

    #[error("requested {requested} seed pairs but only {available} entries are in vocabulary")]
    InsufficientEntries { requested: usize, available: usize },

    #[error("token {token:?} is not in the {side} vocabulary")]
    OutOfVocabulary { side: &'static str, token: String },

    #[error("training data has no example of class {label}")]
    MissingClass { label: &'static str },

    #[error("label {label} is not part of the {scheme} scheme")]
    LabelOutsideScheme { label: &'static str, scheme: &'static str },

    #[error("sentiment scheme mismatch: model is {model}, data is {data}")]
    SchemeMismatch { model: &'static str, data: &'static str },

    #[error("example {index} has an empty token sequence")]
    EmptyExample { index: usize },

    #[error("training diverged: loss became non-finite at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
