use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar or structural parameter is out of range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A state vector left the positive cone.
    #[error("state component {index} = {value} is not positive")]
    Domain { index: usize, value: f64 },

    /// The velocity set or collision table violates a structural requirement.
    #[error("invalid model: {0}")]
    Model(String),

    #[error("steady state rejected: |Q(f_e)|_inf = {residual:e} exceeds tolerance {tolerance:e}")]
    NotSteady { residual: f64, tolerance: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid control law: {0}")]
    Law(String),

    #[error("certificate unavailable: {0}")]
    Certificate(String),

    #[error("CFL number {cfl} exceeds 1")]
    Cfl { cfl: f64 },

    /// `species` is zero-based; messages name it `f1..fn` like the CSV columns.
    #[error("solution diverged at step {step} (f{}): {reason}", .species + 1)]
    Divergence {
        step: usize,
        species: usize,
        reason: String,
    },

    #[error("decay fit failed: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by invalid input rather than a numerical or I/O failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parameter(_)
                | Error::Domain { .. }
                | Error::Model(_)
                | Error::NotSteady { .. }
                | Error::Law(_)
                | Error::Cfl { .. }
                | Error::Config(_)
                | Error::Certificate(_)
        )
    }
}
