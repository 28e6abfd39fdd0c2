use thiserror::Error;

/// Errors raised by the library. Each variant names the failure class so the
/// CLI can surface it verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("symmetry error: {0}")]
    Symmetry(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("degenerate normalization: {0}")]
    DegenerateNormalization(String),
    #[error("unsupported construction: {0}")]
    Unsupported(String),
    #[error("underflow: {0}")]
    Underflow(String),
    #[error("memory guard: {0}")]
    MemoryGuard(String),
    #[error("optimization failure: {0}")]
    Optimization(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable short name of the error class.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "DimensionError",
            Error::Symmetry(_) => "SymmetryError",
            Error::Argument(_) => "ArgumentError",
            Error::Range(_) => "RangeError",
            Error::Shape(_) => "ShapeError",
            Error::Validation(_) => "ValidationError",
            Error::Topology(_) => "TopologyError",
            Error::DegenerateNormalization(_) => "DegenerateNormalization",
            Error::Unsupported(_) => "UnsupportedConstruction",
            Error::Underflow(_) => "UnderflowError",
            Error::MemoryGuard(_) => "MemoryGuard",
            Error::Optimization(_) => "OptimizationFailure",
            Error::Config(_) => "ConfigError",
            Error::Io(_) => "IoError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
