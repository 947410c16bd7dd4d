use regionseq::annotation::AnnotationError;
use regionseq::bilstm::ModelError;
use regionseq::eval::EvalError;
use regionseq::features::FeatureError;
use regionseq::raster::RasterError;
use regionseq::scan::ScanError;
use thiserror::Error;

/// Failure of a subcommand, grouped by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or configuration (exit 1). Every problem found is listed.
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
    /// Missing or malformed inputs (exit 2).
    #[error("{0}")]
    Data(String),
    /// Non-finite values during training or inference (exit 3).
    #[error("numeric fault: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError::Data(message.into())
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        CliError::Validation(vec![message.into()])
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            e if e.is_numeric_fault() => CliError::Numeric(e.to_string()),
            ModelError::InvalidConfig(problems) => CliError::Validation(problems),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Model(m) => m.into(),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<AnnotationError> for CliError {
    fn from(e: AnnotationError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<RasterError> for CliError {
    fn from(e: RasterError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ScanError> for CliError {
    fn from(e: ScanError) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
