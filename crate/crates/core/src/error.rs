use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, CoreError>;

#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Malformed data: non-finite entries, mismatched shapes, duplicate ids.
    InvalidInput(String),
    /// A configuration value outside its documented range.
    InvalidConfig(String),
    /// `I + XᵀX` could not be factorized; only happens with NaN/Inf contamination.
    FactorizationFailure,
    /// The affinity matrix is identically zero.
    DegenerateAffinity,
    /// Every residual entry is below the numeric-zero threshold.
    ZeroResidual,
    EmptyCluster(usize),
    SameCluster(usize),
    LengthMismatch { left: usize, right: usize },
    /// Input to noise injection is not inside `[0, 1]`.
    NotNormalized { row: usize, col: usize, value: f64 },
    EmptyTrain,
    InsufficientData(String),
    InvalidGeometry(String),
    /// A per-window failure surfaced by the stream driver.
    AtWindow { index: usize, source: Box<CoreError> },
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            CoreError::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            CoreError::FactorizationFailure => {
                write!(f, "factorization of I + XᵀX failed (non-finite data?)")
            }
            CoreError::DegenerateAffinity => write!(f, "affinity matrix is identically zero"),
            CoreError::ZeroResidual => write!(f, "residual vector has no entry above numeric zero"),
            CoreError::EmptyCluster(j) => write!(f, "cluster {j} has no members"),
            CoreError::SameCluster(i) => write!(f, "cluster {i} compared with itself"),
            CoreError::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            CoreError::NotNormalized { row, col, value } => {
                write!(f, "entry ({row}, {col}) = {value} lies outside [0, 1]")
            }
            CoreError::EmptyTrain => write!(f, "training set is empty"),
            CoreError::InsufficientData(msg) => write!(f, "insufficient data: {msg}"),
            CoreError::InvalidGeometry(msg) => write!(f, "invalid generator geometry: {msg}"),
            CoreError::AtWindow { index, source } => write!(f, "window {index}: {source}"),
        }
    }
}

impl core::error::Error for CoreError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            CoreError::AtWindow { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}

impl CoreError {
    pub fn at_window(self, index: usize) -> Self {
        CoreError::AtWindow { index, source: Box::new(self) }
    }

    /// True for errors caused by bad configuration rather than bad data.
    pub fn is_config(&self) -> bool {
        match self {
            CoreError::InvalidConfig(_) | CoreError::InvalidGeometry(_) => true,
            CoreError::AtWindow { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
