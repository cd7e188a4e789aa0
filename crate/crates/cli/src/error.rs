use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tdid::Error),

    /// A malformed panel file; `line` and `column` are 1-based.
    #[error("line {line}, column {column}: {message}")]
    Csv { line: u64, column: usize, message: String },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("network error: {0}")]
    Network(String),

    /// The World Bank API answered with an error message.
    #[error("World Bank API error: {0}")]
    Api(String),
}

impl CliError {
    /// 0 success, 1 validation, 2 numeric, 3 IO or network.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => e.exit_code(),
            CliError::Csv { .. } | CliError::Input(_) | CliError::Config(_) => 1,
            CliError::Io { .. } | CliError::Network(_) | CliError::Api(_) => 3,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}
