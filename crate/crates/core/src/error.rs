use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration (profile, range, bounds, run file) is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    /// The adaptive integrator could not make progress.
    #[error("integration failed at t = {t_last}: {reason}")]
    Integration { t_last: f64, reason: String },

    /// A covariance matrix violates the uncertainty principle beyond tolerance.
    #[error("unphysical state at t = {t}: smallest symplectic eigenvalue {nu_min}")]
    Unphysical { t: f64, nu_min: f64 },

    /// Adaptive quadrature did not reach the requested tolerance.
    #[error("quadrature did not converge: estimated error {estimate}")]
    Quadrature { estimate: f64 },

    /// The closed-form logarithmic negativity stays zero over the whole search horizon.
    #[error("never entangled within {periods} periods")]
    NeverEntangled { periods: f64 },

    /// The rectangular pump rate is a delta kick at a jump instant.
    #[error("pump rate is impulsive at t = {t}; use the kick weight {weight}")]
    ImpulsivePump { t: f64, weight: f64 },
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
