use thiserror::Error;

/// Errors produced by pipeline stages.
///
/// The CLI maps these onto exit codes: config/usage problems are caught
/// before a stage runs, `Data`/`Parse`/`Schema` map to the data-error code,
/// and `NonConvergence` to its own code so callers can retry with different
/// settings.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {file} (row {row}): {message}")]
    Parse {
        file: String,
        row: u64,
        message: String,
    },

    #[error("schema mismatch in {file}: {message}")]
    Schema { file: String, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn model(msg: impl Into<String>) -> Self {
        Error::Model(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
