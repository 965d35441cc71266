use thiserror::Error;

/// Errors produced by catalog construction, solvers, metrics, and the runner.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration key failed validation.
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    /// The exact solver's DP table would exceed its entry budget.
    #[error("exact solver budget exceeded: {files} files x (capacity {capacity} + 1) > {budget} table entries")]
    DpBudget {
        files: usize,
        capacity: u64,
        budget: usize,
    },

    /// Good/bad combination enumeration is infeasible on this instance.
    #[error("enumeration budget exceeded: {0}")]
    EnumerationBudget(String),

    /// A bandit policy cannot sample a file larger than the cache.
    #[error("file {file} has size {size} > capacity {capacity}; bandit policies cannot sample it")]
    UnsampleableFile { file: usize, size: u64, capacity: u64 },

    /// Cache efficiency is undefined when nothing was requested.
    #[error("no data requested over the horizon; cache efficiency undefined")]
    NoDemand,

    /// An instance property makes a bound expression undefined.
    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),

    /// An operation argument violated its precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Series or vector lengths disagree.
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("config serialize error: {0}")]
    ConfigSerialize(#[from] toml::ser::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }
}
