use thiserror::Error;

/// Everything that can go wrong inside the library.
///
/// Variant names double as the machine-readable error names reported by the
/// command-line tool, so keep them stable.
#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity: {what} = {value} exceeds the enumeration limit of {limit}")]
    Capacity {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("calibration did not converge after {iterations} inner iterations (max residual {max_residual:.3e})")]
    Calibration {
        iterations: usize,
        max_residual: f64,
        residuals: Vec<f64>,
    },

    #[error("degenerate triplet: |M[{j}][{k}]| = {value:.3e} is below the floor {floor:.1e}")]
    DegenerateTriplet {
        j: usize,
        k: usize,
        value: f64,
        floor: f64,
    },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration {config:#x} has zero empirical probability")]
    UnseenConfiguration { config: u64 },

    #[error("decomposition undefined: {0}")]
    IdentityUndefined(String),

    #[error("degenerate constant: {0}")]
    DegenerateConstant(String),

    #[error("corpus missing: {0}")]
    CorpusMissing(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable variant name, used in CLI diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Capacity { .. } => "CapacityError",
            Error::InvalidModel(_) => "InvalidModel",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Contract(_) => "ContractError",
            Error::Calibration { .. } => "CalibrationError",
            Error::DegenerateTriplet { .. } => "DegenerateTriplet",
            Error::Estimation(_) => "EstimationError",
            Error::Numerical(_) => "NumericalError",
            Error::UnseenConfiguration { .. } => "UnseenConfiguration",
            Error::IdentityUndefined(_) => "IdentityUndefined",
            Error::DegenerateConstant(_) => "DegenerateConstant",
            Error::CorpusMissing(_) => "CorpusMissing",
            Error::Format(_) => "FormatError",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
            Error::Csv(_) => "CsvError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
