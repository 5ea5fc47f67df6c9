use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] multicoag_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for configuration and input problems, 2 for a numerical abort.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(multicoag_core::Error::NumericalAbort { .. }) => 2,
            _ => 1,
        }
    }
}
