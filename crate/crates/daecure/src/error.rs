use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the numerical kernels and the reduction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shifted matrix is singular at shift {shift}")]
    SingularShift { shift: Complex64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Sylvester operator is singular: spectra of A and -B overlap")]
    SpectraOverlap,

    #[error("matrix has an eigenvalue with nonpositive real part")]
    NotAntistable,

    #[error("pencil is singular")]
    SingularPencil,

    #[error("structure violation: {0}")]
    StructureViolation(String),

    #[error("singular Schur complement: {0}")]
    SingularSchurComplement(String),

    #[error("SPARK parameters must be positive (a = {a}, b = {b})")]
    NonPositiveParams { a: f64, b: f64 },

    #[error("duplicate interpolation shift {0}")]
    DuplicateShift(Complex64),

    #[error("pencil has repeated or defective eigenvalues")]
    DefectivePencil,

    #[error("system is not strictly proper")]
    NotStrictlyProper,

    #[error("system is not asymptotically stable")]
    NotStable,

    #[error("Unsupported polynomial part: {0}")]
    UnsupportedPolynomialPart(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("dimension {n} exceeds the dense limit {limit}")]
    ScaleLimit { n: usize, limit: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("dense linear algebra failure: {0}")]
    Linalg(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid manifest: {0}")]
    Manifest(String),
}

impl Error {
    /// Broad category used for process exit codes.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::UnsupportedPolynomialPart(_) | Error::Unsupported(_) | Error::ScaleLimit { .. } => {
                ErrorCategory::Unsupported
            }
            Error::Io { .. } | Error::Parse { .. } | Error::Manifest(_) => ErrorCategory::Io,
            Error::StructureViolation(_) | Error::DimensionMismatch(_) => ErrorCategory::Unsupported,
            _ => ErrorCategory::Numerical,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SingularShift { .. } => "SingularShift",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::SpectraOverlap => "SpectraOverlap",
            Error::NotAntistable => "NotAntistable",
            Error::SingularPencil => "SingularPencil",
            Error::StructureViolation(_) => "StructureViolation",
            Error::SingularSchurComplement(_) => "SingularSchurComplement",
            Error::NonPositiveParams { .. } => "NonPositiveParams",
            Error::DuplicateShift(_) => "DuplicateShift",
            Error::DefectivePencil => "DefectivePencil",
            Error::NotStrictlyProper => "NotStrictlyProper",
            Error::NotStable => "NotStable",
            Error::UnsupportedPolynomialPart(_) => "UnsupportedPolynomialPart",
            Error::Unsupported(_) => "Unsupported",
            Error::ScaleLimit { .. } => "ScaleLimit",
            Error::Parse { .. } => "ParseError",
            Error::Linalg(_) => "LinalgFailure",
            Error::Io { .. } => "IoError",
            Error::Manifest(_) => "ManifestError",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Numerical,
    Unsupported,
    Io,
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
