use thiserror::Error;

/// Errors raised by grid construction, problem assembly and the solvers.
///
/// Divergence of a pseudo-time march is not an error; it is reported in
/// [`crate::schemes::MarchReport`].
#[derive(Debug, Error)]
pub enum NpbError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field mismatch: {0}")]
    FieldMismatch(String),

    #[error("relative norm undefined: reference field is identically zero")]
    ZeroReference,

    #[error("atom {index} at ({x}, {y}, {z}) is not strictly inside the grid interior")]
    AtomOutsideGrid { index: usize, x: f64, y: f64, z: f64 },

    #[error("point coincides with atom {0}; boundary potential is singular there")]
    SingularPoint(usize),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no atoms found in input")]
    NoAtoms,

    #[error("singular tridiagonal system: pivot {pivot:e} at row {row}")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown scheme `{name}`; valid names are: {valid}")]
    UnknownScheme { name: String, valid: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl NpbError {
    /// True for errors caused by the filesystem rather than by the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, NpbError::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, NpbError>;
