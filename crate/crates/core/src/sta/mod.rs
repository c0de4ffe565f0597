//! Invariant-based inverse engineering of detuning pulses.

pub mod detuning;
pub mod profile;
pub mod qsl;
pub mod sensitivity;
pub mod trajectory;

pub use detuning::{detuning_from_theta, detuning_series_closed_form, discretize, ContinuousPulse};
pub use profile::{AnsatzParameter, SeriesCoefficients, ThetaProfile, ANSATZ_A_INTERIOR, ANSATZ_A_MIN};
pub use qsl::{bang_off_bang_qsl, minimize_qsl, qsl_time, BangOffBang, QslOptimum, MAX_QSL_ORDER};
pub use sensitivity::{
    error_integral, error_integrals, optimize_sensitivity, perturbative_transition, ErrorIntegrals, Route,
    SensitivityOptimum, SensitivityTarget,
};
pub use trajectory::{
    ansatz_theta, lr_phase, resonant_theta, series_omega_t, series_theta, AngleTrajectory, DEFAULT_SAMPLES,
};
