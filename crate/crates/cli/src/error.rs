use thiserror::Error;

/// Problems with a run configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },

    #[error("config does not parse: {0}")]
    Parse(String),

    #[error("config error at {path}: {message}")]
    Invalid { path: String, message: String },
}

/// Anything that stops a command before it produces a report.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("unknown observable {0:?}; try om3[v-block] or g[0,1]")]
    UnknownObservable(String),

    #[error("output error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
