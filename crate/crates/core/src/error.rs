use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value for {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("detuning {value} rad/s at step {index} exceeds delta_max {bound} rad/s")]
    DetuningOutOfRange { index: usize, value: f64, bound: f64 },

    #[error("ansatz parameter a = {a} violates a > 2 - pi^2/6 (~0.35507)")]
    AnsatzDomain { a: f64 },

    #[error("ansatz parameter a = {a} drives theta outside [0, pi] (needs a > 0.42662); the detuning diverges where sin(theta) = 0")]
    AnsatzThetaRange { a: f64 },

    #[error("|theta_dot| = {rate} rad/s exceeds the Rabi frequency {omega} rad/s at t = {t} s")]
    ThetaRateExceedsRabi { t: f64, rate: f64, omega: f64 },

    #[error("detuning is singular at t = {t} s (cos(beta) = 0 with nonzero theta_ddot)")]
    SingularDetuning { t: f64 },

    #[error("series coefficients do not match the trajectory they are applied to")]
    MismatchedCoefficients,

    #[error("state amplitudes are not normalized (norm^2 = {norm_sq})")]
    NotNormalized { norm_sq: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("episode already finished; call reset first")]
    EpisodeFinished,

    #[error("ODE integration failed: {0}")]
    Integration(String),

    #[error("optimizer did not reach the required residual: {0}")]
    OptimizationFailed(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Integration(_)
                | Error::OptimizationFailed(_)
                | Error::Diverged(_)
                | Error::SingularDetuning { .. }
        )
    }
}

pub(crate) fn ensure_finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(what))
    }
}
