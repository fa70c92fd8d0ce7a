use thiserror::Error;

/// Errors raised by the numerical kernels, the bound formulas and the
/// experiment harness. Indices in messages are zero-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("eigenvalue at index {index} is repeated (zero spectral gap)")]
    RepeatedEigenvalue { index: usize },
    #[error("operation needs at least two eigenvalues")]
    DimensionTooSmall,
    #[error("invalid beta-model shape: {0}")]
    InvalidShape(String),
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("eigenvector is orthogonal to target axis {index}")]
    OrthogonalTarget { index: usize },
    #[error("sample eigenvalue coincides with population eigenvalue {index}")]
    DegenerateShift { index: usize },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("spectral gap is zero")]
    ZeroGap,
    #[error("alternative bound not applicable (lambda_i / g_i = {ratio} < 1)")]
    NotApplicable { ratio: f64 },
    #[error("no samples supplied")]
    EmptySamples,
    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("config parse error{}: {message}", location(.line, .key))]
    Parse {
        line: Option<usize>,
        key: Option<String>,
        message: String,
    },
    #[error("i/o error: {0}")]
    Io(String),
}

fn location(line: &Option<usize>, key: &Option<String>) -> String {
    match (line, key) {
        (Some(l), Some(k)) => format!(" at line {l}, key `{k}`"),
        (Some(l), None) => format!(" at line {l}"),
        (None, Some(k)) => format!(" at key `{k}`"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub fn validation(field: &str, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
