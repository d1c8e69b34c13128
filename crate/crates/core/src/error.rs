use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A scalar argument is outside its physical domain.
    #[error("domain error: {what} = {value} ({expected})")]
    Domain {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// A covariance matrix violates the uncertainty principle.
    #[error("unphysical state: symplectic eigenvalue {nu} < 1")]
    Unphysical { nu: f64 },

    #[error("degenerate measurement: measured quadrature variance {variance} is not positive")]
    DegenerateMeasurement { variance: f64 },

    #[error("numerical consistency: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("estimation degenerate: {0}")]
    Estimation(String),

    #[error("bracket too small: key rate is still {rate} at eps_max = {eps_max}")]
    BracketTooSmall { eps_max: f64, rate: f64 },

    #[error("cell ({coords}): {source}")]
    Cell {
        coords: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain { what, value, expected }
    }

    /// True when the error (or the cell error it wraps) is an unphysical-state error.
    pub fn is_unphysical(&self) -> bool {
        match self {
            Error::Unphysical { .. } => true,
            Error::Cell { source, .. } => source.is_unphysical(),
            _ => false,
        }
    }
}
