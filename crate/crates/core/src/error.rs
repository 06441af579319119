use thiserror::Error;

/// Errors raised by the frame, grid, solver and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the frame box")]
    Domain { point: Vec<f64> },

    #[error("frame is rank deficient at {point:?} (sigma_min / sigma_max = {ratio:e})")]
    SingularFrame { point: Vec<f64>, ratio: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: String, reason: String },

    #[error("node {node} is {depth} cells from the boundary, stencil needs {needed}")]
    Stencil {
        node: usize,
        depth: usize,
        needed: usize,
    },

    #[error("minimizer stopped after {iterations} iterations with gradient norm {grad_norm:e} (tolerance {grad_tol:e})")]
    NoConvergence {
        iterations: usize,
        grad_norm: f64,
        grad_tol: f64,
        energy_trace: Vec<f64>,
    },

    #[error("fast sweeping stopped after {sweeps} sweeps with last update {last_update:e}")]
    SweepNoConvergence {
        sweeps: usize,
        last_update: f64,
        residual: Vec<f64>,
    },

    #[error("expression error at column {column}: {message}")]
    Expr { column: usize, message: String },

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
