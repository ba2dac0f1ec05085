use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("time {t} outside noise trace covering [0, {end}]")]
    Range { t: f64, end: f64 },

    #[error("integration diverged at step {step}")]
    Diverged { step: usize },

    #[error("{failed} of {total} trajectories diverged (more than 1%)")]
    EnsembleDiverged { failed: usize, total: usize },

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
