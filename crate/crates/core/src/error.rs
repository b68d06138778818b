use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("placement out of bounds: {0}")]
    Placement(String),
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("step out of range: {0}")]
    Step(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid mask: {0}")]
    Mask(String),
    #[error("diagnostic: {0}")]
    Diagnostic(String),
    #[error("transport: {0}")]
    Transport(#[from] std::io::Error),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("remote: {0}")]
    Remote(String),
    #[error("image i/o: {0}")]
    Image(String),
    #[error("at step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures that originate in a denoiser backend or its connection.
    pub fn is_backend(&self) -> bool {
        match self {
            Error::Transport(_) | Error::Protocol(_) | Error::Remote(_) => true,
            Error::AtStep { source, .. } => source.is_backend(),
            _ => false,
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep { step, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
