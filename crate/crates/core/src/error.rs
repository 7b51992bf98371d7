use thiserror::Error;

/// Errors produced by the MiLAC toolkit.
#[derive(Debug, Error)]
pub enum MilacError {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("{what} is numerically singular (condition estimate {condition:.3e})")]
    Singular { what: &'static str, condition: f64 },

    #[error(
        "no symmetric solution: ||AC^T - CA^T||_F = {symmetry_residual:.3e}, \
         ||U2^T C||_F = {range_residual:.3e}"
    )]
    NoSymmetricSolution {
        symmetry_residual: f64,
        range_residual: f64,
    },

    #[error("degenerate target: {0}")]
    DegenerateTarget(String),

    #[error("degenerate channel phase in {context} (singular value ratio {ratio:.3e})")]
    DegeneratePhase { context: String, ratio: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MilacError>;
