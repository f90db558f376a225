//! CLI error taxonomy mapped onto process exit codes.

use rashomon_core::{
    ConsistencyError, DataError, ModelError, MultiplicityError, StatsError, VerifyError,
};

/// Exit codes: 0 success, 1 config error, 2 data error, 3 verification
/// failure.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("verification failure: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::BadDelta(_) | ModelError::BadHyperparameter(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<MultiplicityError> for CliError {
    fn from(e: MultiplicityError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ConsistencyError> for CliError {
    fn from(e: ConsistencyError) -> Self {
        match e {
            ConsistencyError::InvalidConfig(_) => CliError::Config(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::EmptyGrid
            | VerifyError::BadEpsilon(_)
            | VerifyError::ZeroTrials
            | VerifyError::NoCenters
            | VerifyError::BadNoise(_)
            | VerifyError::ZeroDim
            | VerifyError::BadBetaScale(_) => CliError::Config(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("io error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(format!("json error: {e}"))
    }
}
