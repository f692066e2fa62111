use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown alpha family `{0}`")]
    UnknownFamily(String),

    #[error("unknown mixing family `{0}`")]
    UnknownMixing(String),

    #[error("parameter `{name}` = {value} out of range: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("the lower Fréchet bound max(u_1+...+u_n-n+1, 0) is not a copula for n = {0} > 2")]
    FrechetDimension(usize),

    #[error("grid is not a valid Bernstein coefficient grid: {0}")]
    InvalidGrid(String),

    #[error(
        "count pmf tail mass {tail_mass:e} still above {eps_tail:e} at the hard cap L = {cap}"
    )]
    TailNotReached {
        tail_mass: f64,
        eps_tail: f64,
        cap: usize,
    },

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("derivative of order {order} is singular at x = 0 for a < 1")]
    SingularDerivative { order: usize },

    #[error("tail integral diverges: {0}")]
    DivergentTail(String),

    #[error("no bracket for the quantile below {0:e}")]
    BracketNotFound(f64),

    #[error("root finder did not converge in {0} iterations")]
    NoConvergence(usize),

    #[error("only {found} exceedance paths (need at least {needed})")]
    TooFewExceedances { found: usize, needed: usize },

    #[error("theta sampler disagrees with the Laplace transform at s = {s}: {estimate} vs {exact} (stderr {stderr:e})")]
    SamplerCheck {
        s: f64,
        estimate: f64,
        exact: f64,
        stderr: f64,
    },

    #[error("malformed lattice CSV: {0}")]
    Csv(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
