use std::fmt;

use critkill_core::Error;
use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
    /// The run completed but a check was over tolerance.
    Tolerance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Tolerance(_) => 3,
            CliError::Core(e) => match e {
                Error::Input(_) | Error::Singularity(_) | Error::Unsupported(_) | Error::Io(_) => 2,
                Error::Numeric { .. } => 3,
                Error::Estimator(_) => 4,
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Tolerance(_) => "tolerance",
            CliError::Core(e) => match e {
                Error::Input(_) => "input",
                Error::Singularity(_) => "singularity",
                Error::Unsupported(_) => "unsupported",
                Error::Io(_) => "io",
                Error::Numeric { .. } => "numeric",
                Error::Estimator(_) => "estimator",
            },
        }
    }

    /// One-line JSON for stderr.
    pub fn diagnostic(&self) -> String {
        let mut v = json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::Core(Error::Numeric { residual, .. }) = self {
            if residual.is_finite() {
                v["residual"] = json!(residual);
            }
        }
        v.to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Tolerance(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("config: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
