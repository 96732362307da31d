use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    /// Every large-scale gain feeding a UE's compound channel is zero.
    #[error("degenerate channel for {side} UE {index}: zero normalization gain")]
    DegenerateChannel { side: &'static str, index: usize },

    /// The ZF Gram matrix is singular or its condition number exceeds the limit.
    /// Callers treat this as a request to redraw the drop.
    #[error("ill-conditioned {side} Gram matrix (condition number {condition:.3e})")]
    IllConditioned { side: &'static str, condition: f64 },

    #[error("invalid convex program: {0}")]
    InvalidProgram(String),

    #[error("no strictly feasible point (phase-I optimum {0:.3e})")]
    InfeasibleStart(f64),

    #[error("invalid SCA state: {0}")]
    InvalidState(String),

    #[error("malformed data: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
