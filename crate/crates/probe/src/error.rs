use crate::config::ConfigError;
use crate::dataset::DatasetError;
use crate::protocol::ProtocolError;

/// Everything a command can fail with, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Endpoint(#[from] ProtocolError),
    #[error("label space mismatch: {0}")]
    Labels(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{0}")]
    Data(String),
}

impl Error {
    pub fn data(message: impl Into<String>) -> Self {
        Error::Data(message.into())
    }

    /// 2: configuration, 3: model endpoint, 4: data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) => 2,
            Error::Endpoint(_) | Error::Labels(_) => 3,
            Error::Dataset(_) | Error::Data(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
