use std::path::{Path, PathBuf};

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Problems reading a data table.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("line {line}, column `{column}`: `{value}` is not a number")]
    NonNumeric { line: u64, column: String, value: String },

    #[error("line {line}: time {value} is not positive")]
    NonPositiveTime { line: u64, value: f64 },

    #[error("line {line}: event flag `{value}` is neither 0 nor 1")]
    BadEventFlag { line: u64, value: String },

    #[error("line {line}: time {value} exceeds the recorded time scale")]
    TimeBeyondScale { line: u64, value: f64 },

    #[error("no data rows")]
    Empty,

    #[error("{0}")]
    Malformed(String),

    #[error(transparent)]
    Data(#[from] care_core::Error),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },

    #[error("every fit on the grid failed to converge")]
    AllFitsFailed,

    #[error("study: {0}")]
    Study(String),

    #[error(transparent)]
    Core(care_core::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, source: FormatError) -> Self {
        CliError::Format {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Core(_) => 2,
            CliError::Io { .. } | CliError::Format { .. } => 3,
            CliError::AllFitsFailed => 4,
            CliError::Study(_) => 5,
        }
    }
}

impl From<care_core::Error> for CliError {
    fn from(e: care_core::Error) -> Self {
        match e {
            care_core::Error::AllFitsFailed => CliError::AllFitsFailed,
            other => CliError::Core(other),
        }
    }
}
