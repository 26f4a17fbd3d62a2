use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("density is not integrable: {0}")]
    Integrability(String),

    #[error("cannot classify minimum: {0}")]
    Classification(String),

    #[error("resource guard exceeded: {0}")]
    Resource(String),

    #[error("eigensolver did not converge: {0}")]
    Numeric(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported ensemble: {0}")]
    UnsupportedEnsemble(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
