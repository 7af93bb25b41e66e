use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("triplet {index}: {reason}")]
    BadTriplet { index: usize, reason: String },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("dataset is not informative for identification (rank {rank} < {required}); use the Gramian-only path")]
    NotIdentifiable { rank: usize, required: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("problem is infeasible: {0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("no admissible control: {0}")]
    NoControl(String),
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Short machine-readable tag used by the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::BadTriplet { .. } => "bad_triplet",
            Error::Empty(_) => "empty",
            Error::NotIdentifiable { .. } => "not_identifiable",
            Error::Config(_) => "config",
            Error::Infeasible(_) => "infeasible",
            Error::Numerical(_) => "numerical",
            Error::NoControl(_) => "no_control",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
