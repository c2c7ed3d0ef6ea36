use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse ion data: {0}")]
    Parse(String),

    /// An ion-model invariant does not hold. `field` names the offending entry.
    #[error("invalid ion model ({field}): {reason}")]
    Invariant { field: String, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{0} is not a half-integer")]
    NotHalfInteger(f64),

    /// The laser sits inside the guard band around a dipole resonance, where
    /// second-order perturbation theory does not apply.
    #[error(
        "laser at {omega_l:.6e} rad/s is within {guard:.3e} rad/s of the {upper}<-{lower} resonance \
         (detuning {detuning:.3e} rad/s)"
    )]
    ResonanceProximity {
        omega_l: f64,
        upper: String,
        lower: String,
        detuning: f64,
        guard: f64,
    },

    /// A sensitivity that must be nonzero vanished (e.g. a magic wavelength).
    #[error("zero sensitivity: {0}")]
    ZeroSensitivity(String),

    #[error("degenerate fit geometry: {0}")]
    Degenerate(String),

    #[error("no convergence after {iterations} iterations: {reason}")]
    NonConvergence { iterations: usize, reason: String },
}

impl Error {
    pub(crate) fn invariant(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invariant {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by the numerical domain rather than by bad input.
    pub fn is_numerical_domain(&self) -> bool {
        matches!(
            self,
            Error::ResonanceProximity { .. } | Error::ZeroSensitivity(_)
        )
    }
}
