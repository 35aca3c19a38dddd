use robust_detect::Error as CoreError;
use thiserror::Error;

/// Exit statuses. Usage errors from the argument parser also exit with 2.
pub mod exit {
    pub const OK: u8 = 0;
    pub const INTERNAL: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const NO_CONVERGENCE: u8 = 3;
    pub const BREAKDOWN: u8 = 4;
    pub const VERIFY_FAILED: u8 = 5;
    pub const IO: u8 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => exit::CONFIG,
            Self::Io(_) => exit::IO,
            Self::Core(e) => match e {
                CoreError::InvalidGrid(_)
                | CoreError::InvalidDensity(_)
                | CoreError::GridMismatch
                | CoreError::InvalidParameter(_)
                | CoreError::InvalidSet(_)
                | CoreError::Unsupported(_) => exit::CONFIG,
                CoreError::Numeric(_)
                | CoreError::NoConvergence { .. }
                | CoreError::NotBracketed(_)
                | CoreError::InsufficientRange { .. } => exit::NO_CONVERGENCE,
                CoreError::Breakdown(_) => exit::BREAKDOWN,
                CoreError::SamplerBug(_) => exit::INTERNAL,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}
