use thiserror::Error;

/// Errors raised by the numerical and stochastic routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("norm error: {0}")]
    Norm(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("evolution diverged at step {step}")]
    Divergence { step: usize },

    #[error("classical trajectory left the domain at t = {t}")]
    Domain { t: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("jump undefined: rate factor {0:e} vanishes")]
    JumpUndefined(f64),

    #[error("no fixed point reached by t = {t}")]
    Timeout { t: f64 },

    #[error("initial weight 1/2 is the unstable equilibrium")]
    UnstableEquilibrium,

    #[error("oracle check failed: {0}")]
    Oracle(String),

    #[error("observed count in category {0} has zero expected probability")]
    Support(usize),
}

impl Error {
    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
