use thiserror::Error;

/// Errors surfaced by the simulator and the asymptotic solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: &'static str, message: String },

    #[error("point ({x}, {y}) lies outside the lattice extent {extent}")]
    OutsideLattice { x: f64, y: f64, extent: f64 },

    #[error("interferer at zero distance from the base station")]
    ZeroDistance,

    #[error("interference covariance is singular ({actives} active interferers, {antennas} antennas)")]
    SingularCovariance { actives: usize, antennas: usize },

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e} (tolerance {tolerance:e})")]
    Quadrature { estimate: f64, error: f64, tolerance: f64 },

    #[error("root not bracketed: {0}")]
    NoBracket(String),

    #[error("root finder did not converge after {iterations} iterations (last residual {residual:e})")]
    RootNotConverged { iterations: usize, residual: f64 },

    #[error("root is not unique: residual not monotone on [{lo}, {hi}]")]
    NonMonotone { lo: f64, hi: f64 },

    #[error("all {0} trials were rejected")]
    AllTrialsRejected(usize),

    #[error("config error at {context}: {message}")]
    Config { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            message: message.into(),
        }
    }

    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularCovariance { .. }
                | Error::Quadrature { .. }
                | Error::NoBracket(_)
                | Error::RootNotConverged { .. }
                | Error::NonMonotone { .. }
                | Error::AllTrialsRejected(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
