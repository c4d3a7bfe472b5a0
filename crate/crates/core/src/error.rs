//! Error type shared by all engine modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument out of range: {0}")]
    Range(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("field kind mismatch: {0}")]
    Kind(String),

    #[error("unknown catalog problem `{0}`")]
    Catalog(String),

    #[error("oscillation unresolved: {0}")]
    Resolution(String),

    #[error("solver did not converge: {context} (last residual {residual:e})")]
    Solver { context: String, residual: f64 },

    #[error("non-coercive coefficient: indefinite linearization in {0}")]
    Coercivity(String),

    #[error("resource budget exceeded: {0}")]
    Resource(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn in_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}
