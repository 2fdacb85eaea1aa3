use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed record: {0}")]
    Format(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("budget of {0} exceeded")]
    Budget(usize),
    #[error("all runnable processes are blocked")]
    Deadlock,
    #[error("restart budget of {0} exhausted")]
    RestartBudget(usize),
    #[error("schedule sets come from different workloads")]
    FingerprintMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
