use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quadrature did not reach its tolerance within the allowed refinements.
    #[error(
        "quadrature failed to converge after {levels} refinements \
         (best estimate {estimate:e}, error bound {error_bound:e})"
    )]
    NoConvergence {
        estimate: f64,
        error_bound: f64,
        levels: usize,
    },

    /// An integrand returned NaN or infinity at an interior node.
    #[error("integrand is not finite at {at:e}")]
    NonFiniteIntegrand { at: f64 },

    /// The posterior normalizer vanished or could not be represented.
    #[error("degenerate posterior: {0}")]
    DegeneratePosterior(String),

    /// The intensity's support is not compatible with the requested operation.
    #[error("unsupported intensity: {0}")]
    UnsupportedIntensity(String),

    /// A Gibbs weight provider failed its recursion check.
    #[error("weights violate the Gibbs recursion (max relative residual {residual:e})")]
    RecursionViolated { residual: f64 },

    /// Malformed input data (allocations, partitions, model specifications).
    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse {
            line: None,
            message: msg.into(),
        }
    }

    /// True for errors caused by numerical non-convergence.
    pub fn is_numeric_failure(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::NonFiniteIntegrand { .. } | Error::DegeneratePosterior(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
