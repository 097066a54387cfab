use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("infeasible regime: delta = {delta} is not above delta* = {delta_star}")]
    Infeasible { delta: f64, delta_star: f64 },

    #[error("{context} did not converge (last residuals {residuals:?})")]
    NonConvergence {
        context: String,
        residuals: Vec<f64>,
    },

    #[error("unsupported: {0}")]
    Capability(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
