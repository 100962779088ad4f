use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] elixir_core::Error),

    #[error("{0}")]
    Missing(String),

    #[error("{0}")]
    Invalid(String),

    #[error("slate version {got} is stale; current version is {current}")]
    Stale { current: u64, got: u64 },

    #[error("a relearn is already running for `{0}`")]
    Busy(String),
}

pub type ServiceResult<T> = std::result::Result<T, ServiceError>;
