use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {what}: {message}")]
    Parse { what: &'static str, message: String },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("unknown level `{level}` for attribute `{attribute}`")]
    UnknownLevel { attribute: String, level: String },
    #[error("invalid profile: {0}")]
    Profile(String),
    #[error("invalid design spec: {0}")]
    DesignSpec(String),
    #[error("invalid template: {0}")]
    Template(String),
    #[error("invalid agent config: {0}")]
    AgentConfig(String),
    #[error("coefficient vector does not match schema: {0}")]
    BetaMismatch(String),
    #[error("credential environment variable `{0}` is not set")]
    MissingCredential(String),
    #[error("record references unknown choice set {0}")]
    UnknownSet(u64),
    #[error("no effective responses")]
    NoEffectiveResponses,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("fit did not converge; pass force to use it anyway")]
    NotConverged,
    #[error("restricted fit without `{0}` did not converge")]
    RestrictedFit(String),
    #[error("effects require paired choice sets (J = 2), got J = {0}")]
    NotPaired(usize),
    #[error("fits are not comparable: {0}")]
    SchemaMismatch(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(what: &'static str, err: serde_json::Error) -> Self {
        Error::Parse {
            what,
            message: err.to_string(),
        }
    }
}
