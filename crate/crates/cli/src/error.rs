use scengen_core::{DataError, EngineError, ModelError, RiskError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    FilterDegenerate(String),
    #[error("{0}")]
    ModelFile(String),
    #[error("{0}")]
    ValidationFailed(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Input(_) => 2,
            CliError::FilterDegenerate(_) => 3,
            CliError::ModelFile(_) => 4,
            CliError::ValidationFailed(_) => 5,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::AllReturnsExtreme | ModelError::Filter(_) | ModelError::EmptyPanel => {
                CliError::FilterDegenerate(e.to_string())
            }
            ModelError::UnsupportedFormat(_)
            | ModelError::UnsupportedVersion { .. }
            | ModelError::Corrupt(_) => CliError::ModelFile(e.to_string()),
            ModelError::Io(_) => CliError::Input(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::InvalidConfig(_)
            | EngineError::InvalidTimeChange(_)
            | EngineError::InvalidJumpSpec(_) => CliError::Input(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<RiskError> for CliError {
    fn from(e: RiskError) -> Self {
        match e {
            RiskError::Model(m) => m.into(),
            RiskError::Engine(m) => m.into(),
            RiskError::Data(d) => d.into(),
            RiskError::Csv(_) | RiskError::Io(_) => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}
