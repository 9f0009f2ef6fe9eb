use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("slice at height {height} is not transverse: {detail}")]
    NonTransverseSlice { height: f64, detail: String },

    #[error("degenerate crossing near ({x:.6}, {y:.6}): strands meet at {angle:.3e} rad; refine the grid or perturb the height")]
    DegenerateCrossing { x: f64, y: f64, angle: f64 },

    #[error("curve tracing failed: {0}")]
    TraceFailed(String),

    #[error("no critical point found for crossing {crossing}: {detail}")]
    MissingCriticalPoint { crossing: usize, detail: String },

    #[error("family is not generic: {0}")]
    NonGenericFamily(String),

    #[error("invalid crossing path: {0}")]
    InvalidPath(String),

    #[error("path is undersampled: tangent line jumps by {jump:.3} rad between samples {index} and {next}", next = index + 1)]
    UndersampledPath { index: usize, jump: f64 },

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("cubical engine supports domains of dimension at most 4, got {0}")]
    UnsupportedDimension(usize),

    #[error("eta = {eta} is too large: critical value {value} lies within (0, eta]")]
    BadEta { eta: f64, value: f64 },

    #[error("sweep does not reach beyond all critical values: {0}")]
    InsufficientSweep(String),

    #[error("single-crossing rule needs exactly one double point, found {0}")]
    RuleNotApplicable(usize),

    #[error("box does not contain the slice: {0}")]
    InvalidBox(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by the numerics rather than by the caller's input.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::InvalidParams(_) | Error::Io(_) | Error::InvalidBox(_) | Error::Unsupported(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
