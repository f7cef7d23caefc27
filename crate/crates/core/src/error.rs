use thiserror::Error;

/// Errors raised by the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Kernel evaluated at coincident points (or on a corner).
    #[error("kernel singularity: {0}")]
    Singular(String),

    /// Adaptive quadrature ran out of subdivisions.
    #[error("adaptive quadrature did not converge: estimate error {error_bound:.3e} > tolerance {tol:.3e} after {intervals} intervals")]
    Quadrature {
        tol: f64,
        error_bound: f64,
        intervals: usize,
        /// Best available estimate of the integral, per component.
        estimate: Vec<num_complex::Complex64>,
    },

    /// Quadrature failure while building a corrected interaction.
    #[error("near-field correction for target {target}, panel {panel}: {source}")]
    Correction {
        target: usize,
        panel: usize,
        #[source]
        source: Box<Error>,
    },

    /// Iterative or direct solver failure.
    #[error("solver failure: {reason} (relative residual {residual:.3e} after {iterations} iterations)")]
    Solver {
        reason: String,
        residual: f64,
        iterations: usize,
    },

    /// Eigensolver failure.
    #[error("eigensolver failure: {0}")]
    Eigen(String),

    /// Invalid run configuration.
    #[error("invalid configuration at `{field}`: {message}")]
    Config { field: String, message: String },

    /// File access (reference cache, outputs).
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
