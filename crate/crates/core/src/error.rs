use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter fails a domain precondition (non-positive extent, bad
    /// variance, weights that do not normalize, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two profiles (or a profile and a sampled mask) live on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The reference-beam LO has no weight in the analysis basis, so its
    /// expansion coefficients cannot be normalized.
    #[error("degenerate local oscillator: {0}")]
    DegenerateLo(String),

    /// The transmission does not vary over the stencil, so a derivative with
    /// respect to it is undefined.
    #[error("degenerate parameterization: {0}")]
    DegenerateParameterization(String),

    /// The extremum of a scan sits on the first or last sample.
    #[error("extremum on scan boundary: {0}")]
    BoundaryExtremum(String),

    /// The measured noise carries no information about the mask.
    #[error("no signal: {0}")]
    NoSignal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv parse error: {0}")]
    CsvParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
