use thiserror::Error;

/// Errors surfaced by the kernel pipeline.
#[derive(Error, Debug)]
pub enum RwkError {
    /// Dataset directory or file could not be read or parsed.
    #[error("ingestion failed for {path}: {reason}")]
    Ingestion { path: String, reason: String },

    /// Loaded data is internally inconsistent (counts, indices, symmetry).
    #[error("integrity check failed: {0}")]
    Integrity(String),

    /// Operands have incompatible shapes.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A numeric routine produced a non-finite value or failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A persisted artifact has an unrecognized or corrupt layout.
    #[error("bad file format: {0}")]
    Format(String),

    /// Run configuration is missing, malformed, or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RwkError>;
