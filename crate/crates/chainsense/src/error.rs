use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {field}: {message}")]
    Config { field: String, message: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: chainsense_core::Error,
    },
    #[error("{0} acceptance check(s) failed")]
    SelfTest(usize),
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn core(context: impl Into<String>, source: chainsense_core::Error) -> Self {
        CliError::Core {
            context: context.into(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for numerical failures, 4 for a failed
    /// self-test, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Parse { .. } => 2,
            CliError::Core { source, .. } if source.is_numerical() => 3,
            CliError::Core { .. } => 2,
            CliError::SelfTest(_) => 4,
            CliError::Io { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;
    use chainsense_core::Error;

    #[test]
    fn exit_codes() {
        let degenerate = Error::Repeat {
            index: 3,
            source: Box::new(Error::DegeneratePosterior),
        };
        assert_eq!(CliError::core("cell", degenerate).exit_code(), 3);
        assert_eq!(CliError::core("cell", Error::Eigensolver { dim: 32 }).exit_code(), 3);
        assert_eq!(CliError::core("fit", Error::TooFewPoints { found: 1 }).exit_code(), 2);
        assert_eq!(CliError::config("chain.n_sites", "zero").exit_code(), 2);
        assert_eq!(CliError::SelfTest(1).exit_code(), 4);
        let io = CliError::io("x", io::Error::from(io::ErrorKind::PermissionDenied));
        assert_eq!(io.exit_code(), 1);
    }
}
