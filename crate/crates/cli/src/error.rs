use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Parse(String),
    #[error("config error: {key}: {message}")]
    Config { key: String, message: String },
    #[error(transparent)]
    Core(#[from] bondint::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
