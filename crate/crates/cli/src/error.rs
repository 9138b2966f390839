use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    BadFlag(String),

    #[error("cannot parse {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),

    #[error(transparent)]
    Model(#[from] infhs::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        CliError::Parse { path: path.into(), msg: msg.to_string() }
    }

    /// 2 for bad flags or inputs, 3 for numerical failures, 4 for I/O.
    pub fn exit_code(&self) -> u8 {
        use infhs::Error as E;
        match self {
            CliError::BadFlag(_) | CliError::Parse { .. } | CliError::UnsupportedCombination(_) => 2,
            CliError::Io { .. } => 4,
            CliError::Model(e) => match e {
                E::DimensionMismatch(_)
                | E::MissingIntercept { .. }
                | E::InvalidHyper(_)
                | E::InvalidBinaryResponse { .. }
                | E::NonFiniteInput(_)
                | E::InvalidArgument(_)
                | E::DegenerateLabels
                | E::TooManyCodataColumns { .. } => 2,
                E::NoPositiveRoot { .. }
                | E::QuadratureFailure(_)
                | E::AcceptanceStall { .. }
                | E::SingularSystem(_)
                | E::NumericalOverflow { .. }
                | E::ElboDecrease { .. }
                | E::NonConvergence { .. } => 3,
            },
        }
    }
}
