use thiserror::Error;

/// Failure of one pipeline stage. The variant identifies the stage so that
/// callers (the CLI in particular) can map it onto a distinct exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("domain: {0}")]
    Domain(String),

    #[error("quadrature: point {point} failed with relative constraint residual {residual:.3e}")]
    Quadrature { point: usize, residual: f64 },

    #[error("assembly: {0}")]
    Assembly(String),

    #[error("solve: {0}")]
    Solve(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("io: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
