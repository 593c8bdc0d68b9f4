use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One problem found while reading a configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("scaling regime violated: {0}")]
    Regime(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("surround friction is not positive (beta0 = {beta0:.6e}) for sampled mass {mass:.6e}")]
    NonPositiveFriction { mass: f64, beta0: f64 },

    #[error("covariance factorization failed at pivot {pivot} with jitter {jitter:.3e}")]
    Factorization { pivot: usize, jitter: f64 },

    #[error("non-finite state in trajectory {trajectory} at step {step}")]
    NonFinite { trajectory: usize, step: usize },

    #[error("density at the grid boundary is {value:.3e}, above the aliasing threshold {limit:.1e}")]
    BoundaryMass { value: f64, limit: f64 },

    #[error("spectral evolution left an imaginary residue of {0:.3e}")]
    ImaginaryResidue(f64),

    #[error("quadrature did not reach tolerance (error estimate {0:.3e})")]
    Quadrature(f64),

    #[error("at N = {particles}: {source}")]
    Sweep { particles: usize, source: Box<Error> },

    #[error("{}", join_schema(.0))]
    Config(Vec<SchemaError>),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join_schema(errors: &[SchemaError]) -> String {
    let lines: Vec<String> = errors.iter().map(ToString::to_string).collect();
    format!("configuration rejected:\n  {}", lines.join("\n  "))
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        if let Error::Sweep { source, .. } = self {
            return source.is_numerical();
        }
        matches!(
            self,
            Error::Factorization { .. }
                | Error::NonFinite { .. }
                | Error::ImaginaryResidue(_)
                | Error::Quadrature(_)
        )
    }
}
