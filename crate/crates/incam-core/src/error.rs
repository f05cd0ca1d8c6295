use thiserror::Error;

/// Errors shared across the pipeline blocks and the cost model.
#[derive(Debug, Error)]
pub enum Error {
    /// A byte stream could not be parsed as the expected file format.
    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    /// A model or pipeline document violated its schema.
    #[error("schema error in field `{field}`: {msg}")]
    Schema { field: String, msg: String },

    /// A placement configuration is inconsistent with its pipeline graph.
    #[error("configuration error: {0}")]
    Config(String),

    /// Image or buffer dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A parameter is outside its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(offset: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            msg: msg.into(),
        }
    }

    pub(crate) fn schema(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
