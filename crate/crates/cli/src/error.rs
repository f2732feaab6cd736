use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad command line, config file or parameter value.
    #[error("{0}")]
    Usage(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] coopfield::Error),
    /// A self-check reported failures.
    #[error("{0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use coopfield::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Check(_) => EXIT_NUMERICAL,
            CliError::Model(e) => match e {
                E::Parameter { .. } | E::Mode(_) | E::Capacity { .. } | E::Domain(_) | E::Chain(_) => {
                    EXIT_USAGE
                }
                E::Convergence { .. } | E::Numerical(_) | E::NotFound(_) | E::Fit(_) => EXIT_NUMERICAL,
            },
        }
    }

    pub(crate) fn io(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{context}: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
