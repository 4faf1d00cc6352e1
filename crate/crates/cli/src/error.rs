use std::fmt::Display;

/// A failed command, classified by who has to fix it.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    pub fn config(msg: impl Display) -> Self {
        CliError::Config(msg.to_string())
    }

    pub fn data(msg: impl Display) -> Self {
        CliError::Data(msg.to_string())
    }

    pub fn runtime(msg: impl Display) -> Self {
        CliError::Runtime(msg.to_string())
    }
}

/// Classify a library error: bad parameters are config errors, unreadable or
/// mislabeled inputs are data errors, everything else is a runtime failure.
impl From<sgda_core::Error> for CliError {
    fn from(e: sgda_core::Error) -> Self {
        use sgda_core::Error as E;
        match e {
            E::InvalidParam { .. } | E::ZeroSlip | E::MissingBearing(_) | E::Fault { .. } | E::NotBearingFault { .. } => {
                CliError::Config(e.to_string())
            }
            E::Parse { .. }
            | E::EmptyInput(_)
            | E::SignalTooShort { .. }
            | E::UnknownLabel(_)
            | E::Container(_)
            | E::Io { .. } => CliError::Data(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
