//! CLI error taxonomy mapped to exit codes: configuration problems exit 2,
//! bad or missing input data exits 3, internal failures exit 1.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn config(err: impl fmt::Display) -> Self {
        CliError::Config(err.to_string())
    }

    pub fn data(err: impl fmt::Display) -> Self {
        CliError::Data(err.to_string())
    }

    pub fn runtime(err: impl fmt::Display) -> Self {
        CliError::Runtime(err.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Data(msg) => write!(f, "data error: {msg}"),
            CliError::Runtime(msg) => write!(f, "runtime failure: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

impl From<social_reward::store::StoreError> for CliError {
    fn from(err: social_reward::store::StoreError) -> Self {
        CliError::Data(err.to_string())
    }
}

impl From<social_reward::curation::CurationError> for CliError {
    fn from(err: social_reward::curation::CurationError) -> Self {
        use social_reward::curation::CurationError;
        match err {
            CurationError::InvalidConfig(_) => CliError::Config(err.to_string()),
            _ => CliError::Data(err.to_string()),
        }
    }
}

impl From<social_reward::sim::SimError> for CliError {
    fn from(err: social_reward::sim::SimError) -> Self {
        use social_reward::sim::SimError;
        match err {
            SimError::InvalidConfig(_) => CliError::Config(err.to_string()),
            SimError::Io(_) => CliError::Runtime(err.to_string()),
            _ => CliError::Data(err.to_string()),
        }
    }
}

impl From<social_reward::trainer::TrainError> for CliError {
    fn from(err: social_reward::trainer::TrainError) -> Self {
        use social_reward::trainer::TrainError;
        match err {
            TrainError::InvalidConfig(_) => CliError::Config(err.to_string()),
            TrainError::NonFiniteLoss { .. } => CliError::Runtime(err.to_string()),
            _ => CliError::Data(err.to_string()),
        }
    }
}

impl From<social_reward::eval::EvalError> for CliError {
    fn from(err: social_reward::eval::EvalError) -> Self {
        CliError::Data(err.to_string())
    }
}

impl From<social_reward::analysis::AnalysisError> for CliError {
    fn from(err: social_reward::analysis::AnalysisError) -> Self {
        CliError::Data(err.to_string())
    }
}

impl From<social_reward::finetune::FinetuneError> for CliError {
    fn from(err: social_reward::finetune::FinetuneError) -> Self {
        use social_reward::finetune::FinetuneError;
        match err {
            FinetuneError::InvalidConfig(_) => CliError::Config(err.to_string()),
            _ => CliError::Data(err.to_string()),
        }
    }
}

impl From<social_reward::encoder::EncoderError> for CliError {
    fn from(err: social_reward::encoder::EncoderError) -> Self {
        CliError::Data(err.to_string())
    }
}

impl From<social_reward::jsonl::JsonlError> for CliError {
    fn from(err: social_reward::jsonl::JsonlError) -> Self {
        CliError::Data(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}
