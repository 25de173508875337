use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KpzError {
    #[error("domain error in {func}: argument {value}")]
    Domain { func: &'static str, value: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("integrand returned non-finite value {value} at node {node}")]
    Evaluation { node: f64, value: f64 },
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<KpzError>,
    },
}

impl KpzError {
    pub fn context(self, context: impl Into<String>) -> Self {
        KpzError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, KpzError>;
