use thiserror::Error;

/// Errors raised by the library and mapped to CLI exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("size error: {points} points exceeds the budget of {budget}")]
    Size { points: usize, budget: usize },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("solver did not converge: {message} (gap {gap:.3e}, violation {violation:.3e})")]
    Solver {
        message: String,
        gap: f64,
        violation: f64,
    },

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown field name: {0}")]
    UnknownField(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid json at {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 2 config, 3 numeric failure, 4 resolution.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::UnknownField(_)
            | Error::Size { .. }
            | Error::Io { .. }
            | Error::Json { .. } => 2,
            Error::Domain(_) | Error::Solver { .. } | Error::Invariant(_) => 3,
            Error::Resolution(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Size { .. } => "size",
            Error::Resolution(_) => "resolution",
            Error::Solver { .. } => "solver",
            Error::Invariant(_) => "invariant",
            Error::Config(_) => "config",
            Error::UnknownField(_) => "unknown_field",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
        }
    }
}
