use thiserror::Error;

/// Errors raised anywhere in the reconstruction pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {point:?} lies outside the {what}")]
    Domain { what: &'static str, point: Vec<f64> },

    #[error("observation region boundary {coord} is not aligned with the mesh")]
    Misaligned { coord: f64 },

    #[error("degenerate element geometry: {0}")]
    SingularGeometry(String),

    #[error("factorization broke down at pivot {pivot}")]
    SingularSystem { pivot: usize },

    #[error("solve did not converge: relative residual {residual:.3e}, condition estimate {condition:.3e}")]
    IllConditioned { residual: f64, condition: f64 },

    #[error("forward solve: {0}")]
    Forward(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("internal: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
