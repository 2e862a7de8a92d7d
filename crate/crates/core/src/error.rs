use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("singular evaluation point: {0}")]
    Singularity(String),

    #[error("numerical failure: {msg} (residual {residual:e})")]
    Numeric { msg: String, residual: f64 },

    #[error("estimator failure: {0}")]
    Estimator(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>, residual: f64) -> Self {
        Error::Numeric {
            msg: msg.into(),
            residual,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
