use thiserror::Error;

/// Failure kinds shared by every module.
#[derive(Debug, Error)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("membership error: {0}")]
    Membership(String),
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),
    #[error("coercivity error: {0}")]
    Coercivity(String),
    #[error("admissibility error: {0}")]
    Admissibility(String),
    #[error("solve error: {0}")]
    Solve(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
