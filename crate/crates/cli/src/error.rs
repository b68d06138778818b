use thiserror::Error;

/// Exit statuses. Stable; scripts may depend on them.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INPUT: i32 = 2;
    pub const BACKEND: i32 = 3;
    pub const INTERNAL: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] xdc_core::Error),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use xdc_core::Error as E;
        match self {
            CliError::Input(_) => exit::INPUT,
            CliError::Internal(_) => exit::INTERNAL,
            CliError::Core(e) if e.is_backend() => exit::BACKEND,
            CliError::Core(
                E::Image(_) | E::Config(_) | E::Shape(_) | E::Placement(_) | E::Mask(_) | E::InvalidFilter(_),
            ) => exit::INPUT,
            CliError::Core(_) => exit::INTERNAL,
        }
    }
}
