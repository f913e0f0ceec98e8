use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("network generation failed: {0}")]
    Generation(#[source] netred::Error),
    #[error(transparent)]
    Core(#[from] netred::Error),
    #[error("no order in the sweep reached an optimal solve ({0})")]
    SweepFailed(String),
}

impl CliError {
    /// `2` usage or input, `3` generation, `4` infeasible, `5` numerical,
    /// `6` no sparsity solution, `7` not an M-matrix.
    pub fn exit_code(&self) -> u8 {
        use netred::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Generation(_) => 3,
            CliError::SweepFailed(msg) if msg.contains("infeasible") => 4,
            CliError::SweepFailed(_) => 5,
            CliError::Core(e) => match e {
                E::Io(_)
                | E::Parse { .. }
                | E::Schema { .. }
                | E::Validation(_)
                | E::InvalidArgument(_)
                | E::RankTooLarge { .. }
                | E::DimensionMismatch(_)
                | E::NotProportional
                | E::NotSemistable { .. } => 2,
                E::DisconnectedAfterRetries { .. } => 3,
                E::Infeasible(_) | E::Unbounded(_) => 4,
                E::NoSolutionFound { .. } => 6,
                E::NotMMatrix { .. } => 7,
                _ => 5,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(netred::Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(netred::Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map_or(0, |p| p.line() as usize);
        CliError::Core(netred::Error::Parse {
            line,
            column: 0,
            message: e.to_string(),
        })
    }
}

pub type CliResult<T> = Result<T, CliError>;
