use thiserror::Error;

/// Errors raised while assembling or running a simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pixel ({row}, {col}) outside a {rows}x{cols} grid")]
    PixelOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("slice depth {z} m outside crystal of length {length} m")]
    DepthOutOfRange { z: f64, length: f64 },

    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("wave function is identically zero")]
    ZeroWavefunction,

    #[error("mask selects {selected} pixels, at least {required} required")]
    InsufficientMask { selected: usize, required: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::InvalidGrid(_)
            | Error::GridMismatch(_)
            | Error::InvalidParameter(_)
            | Error::PixelOutOfRange { .. }
            | Error::DepthOutOfRange { .. }
            | Error::InsufficientMask { .. } => 3,
            Error::SizeGuard(_) => 4,
            Error::ZeroWavefunction | Error::Numerical(_) => 5,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
