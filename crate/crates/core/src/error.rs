use thiserror::Error;

/// Errors raised by the simulation kernels and file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("horizon N = {requested} exceeds the enumeration limit {limit}")]
    HorizonTooLarge { requested: usize, limit: usize },

    #[error("quadrature with {quad_points} points cannot resolve n_max = {n_max} (need a power of two >= {required})")]
    QuadratureResolution {
        quad_points: usize,
        n_max: usize,
        required: usize,
    },

    #[error("quadrature not converged at N = {step}: |hs(G) - hs(2G)| = {discrepancy:e} with G = {grid}")]
    NotConverged {
        step: usize,
        grid: usize,
        discrepancy: f64,
    },

    #[error("near-singular denominator |cos(A/2)| = {magnitude:e} at ({theta1}, {theta2})")]
    Singular {
        theta1: f64,
        theta2: f64,
        magnitude: f64,
    },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
