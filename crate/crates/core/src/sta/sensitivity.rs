//! First-order error sensitivity of a trajectory and its minimization.
//!
//! To second order in the errors the leak out of the target state is
//! P = (1/4) |int e^{i eta} (dDelta sin(theta) - i 2 dOmega theta_dot sin^2(theta)) dt|^2.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::profile::{AnsatzParameter, SeriesCoefficients, ThetaProfile, ANSATZ_A_INTERIOR};
use super::trajectory::AngleTrajectory;
use crate::error::{Error, Result};
use crate::numerics::ode::DormandPrince;
use crate::numerics::optimize::scan_then_brent;
use crate::numerics::quadrature::integrate;
use crate::qubit::{ControlField, ErrorPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensitivityTarget {
    DetuningError,
    RabiError,
}

impl SensitivityTarget {
    /// Magnitude of the corresponding integral for the flat pi pulse, in the
    /// dimensionless units of [`error_integral`].
    pub fn flat_baseline(&self) -> f64 {
        match self {
            Self::DetuningError => 2.0,
            Self::RabiError => PI,
        }
    }
}

impl fmt::Display for SensitivityTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::DetuningError => "detuning-error",
            Self::RabiError => "rabi-error",
        })
    }
}

impl FromStr for SensitivityTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "detuning-error" | "detuning" | "delta" => Ok(Self::DetuningError),
            "rabi-error" | "rabi" | "omega" => Ok(Self::RabiError),
            _ => Err(Error::InvalidParameter(format!("unknown sensitivity target {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Ansatz,
    Series,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ansatz => "ansatz",
            Self::Series => "series",
        })
    }
}

impl FromStr for Route {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ansatz" => Ok(Self::Ansatz),
            "series" => Ok(Self::Series),
            _ => Err(Error::InvalidParameter(format!("unknown route {s:?}"))),
        }
    }
}

/// The two complex error integrals in units where Omega = 1:
/// `detuning` = Omega int e^{i eta} sin(theta) dt, `rabi` = int e^{i eta} 2 theta_dot sin^2(theta) dt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorIntegrals {
    pub detuning: Complex64,
    pub rabi: Complex64,
}

impl ErrorIntegrals {
    pub fn get(&self, target: SensitivityTarget) -> Complex64 {
        match target {
            SensitivityTarget::DetuningError => self.detuning,
            SensitivityTarget::RabiError => self.rabi,
        }
    }
}

const QUAD_ABS: f64 = 1e-12;

fn series_integrals(alphas: &SeriesCoefficients) -> ErrorIntegrals {
    // Omega dt = w d(theta) along the series trajectory
    let phase = |th: f64| Complex64::from_polar(1.0, alphas.eta(th));
    let detuning = integrate(|th| phase(th) * (th.sin() * alphas.w(th)), 0.0, PI, QUAD_ABS, 1e-12).value;
    let rabi = integrate(|th| phase(th) * (2.0 * th.sin().powi(2)), 0.0, PI, QUAD_ABS, 1e-12).value;
    ErrorIntegrals { detuning, rabi }
}

fn ansatz_integrals(a: AnsatzParameter) -> Result<ErrorIntegrals> {
    // integrate in s = t/T: eta together with both integrals
    let omega_t = a.omega_t();
    let rhs = |s: f64, y: &[f64; 5]| {
        let (sin_eta, cos_eta) = y[0].sin_cos();
        let sin_th = a.theta(s).sin();
        let d = omega_t * sin_th;
        let r = omega_t * 2.0 * a.rate(s) * sin_th * sin_th;
        [a.eta_rate_scaled(s), d * cos_eta, d * sin_eta, r * cos_eta, r * sin_eta]
    };
    let sol = DormandPrince::new(1e-11, 1e-13).integrate(rhs, 0.0, [0.0; 5], 1.0)?;
    let y = sol.y_end;
    Ok(ErrorIntegrals { detuning: Complex64::new(y[1], y[2]), rabi: Complex64::new(y[3], y[4]) })
}

/// Error integrals of a generating profile, independent of Omega.
pub fn profile_integrals(profile: &ThetaProfile) -> Result<ErrorIntegrals> {
    match profile {
        ThetaProfile::Resonant => Ok(ErrorIntegrals {
            detuning: integrate(|th: f64| Complex64::new(th.sin(), 0.0), 0.0, PI, QUAD_ABS, 1e-12).value,
            rabi: integrate(|th: f64| Complex64::new(2.0 * th.sin().powi(2), 0.0), 0.0, PI, QUAD_ABS, 1e-12).value,
        }),
        ThetaProfile::Series { alphas } => Ok(series_integrals(alphas)),
        ThetaProfile::Ansatz { a } => ansatz_integrals(*a),
    }
}

pub fn error_integrals(traj: &AngleTrajectory) -> Result<ErrorIntegrals> {
    profile_integrals(traj.profile())
}

/// |int e^{i eta} sin(theta) dt| * Omega for detuning errors (flat pulse: 2), or
/// |int e^{i eta} 2 theta_dot sin^2(theta) dt| for Rabi errors (flat pulse: pi).
pub fn error_integral(traj: &AngleTrajectory, target: SensitivityTarget) -> Result<f64> {
    Ok(error_integrals(traj)?.get(target).norm())
}

/// Second-order estimate of the population left behind by `err`.
pub fn perturbative_transition(traj: &AngleTrajectory, err: &ErrorPair) -> Result<f64> {
    err.check_finite()?;
    let j = error_integrals(traj)?;
    let omega = traj.field().omega();
    let amp = j.detuning * (err.delta_delta / omega) - Complex64::i() * j.rabi * err.delta_omega;
    Ok(0.25 * amp.norm_sqr())
}

/// Result of a 1-D sensitivity minimization; serializes as the optimizer report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityOptimum {
    pub route: Route,
    pub target: SensitivityTarget,
    /// a for the ansatz route, alpha_1 for the series route.
    pub parameter: f64,
    /// Error-integral magnitude at the optimum (dimensionless).
    pub residual: f64,
    #[serde(rename = "T_s")]
    pub duration_s: f64,
    #[serde(rename = "qsl_omega_T")]
    pub omega_t: f64,
}

fn route_objective(route: Route, target: SensitivityTarget, p: f64) -> f64 {
    let profile = match route {
        Route::Ansatz => match AnsatzParameter::new(p) {
            Ok(a) => ThetaProfile::Ansatz { a },
            Err(_) => return f64::INFINITY,
        },
        Route::Series => match SeriesCoefficients::new(vec![p]) {
            Ok(alphas) => ThetaProfile::Series { alphas },
            Err(_) => return f64::INFINITY,
        },
    };
    profile_integrals(&profile).map(|j| j.get(target).norm()).unwrap_or(f64::INFINITY)
}

/// Scan-and-refine search for the parameter that cancels the chosen error
/// channel. Fails when the best residual is above 10% of the flat baseline.
pub fn optimize_sensitivity(route: Route, target: SensitivityTarget, field: &ControlField) -> Result<SensitivityOptimum> {
    let (lo, hi) = match route {
        Route::Ansatz => (ANSATZ_A_INTERIOR, 2.0),
        Route::Series => (-3.0, 3.0),
    };
    let best = scan_then_brent(&|p| route_objective(route, target, p), lo, hi, 200, 1e-10);
    let baseline = target.flat_baseline();
    if !best.value.is_finite() || best.value > 0.1 * baseline {
        return Err(Error::OptimizationFailed(format!(
            "{route}/{target}: best residual {} at {} exceeds 10% of the flat baseline {baseline}",
            best.value, best.x
        )));
    }
    let omega_t = match route {
        Route::Ansatz => AnsatzParameter::new(best.x)?.omega_t(),
        Route::Series => super::qsl::qsl_time(&SeriesCoefficients::new(vec![best.x])?),
    };
    Ok(SensitivityOptimum {
        route,
        target,
        parameter: best.x,
        residual: best.value,
        duration_s: omega_t / field.omega(),
        omega_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::{final_population, PulseSequence};
    use crate::sta::trajectory::{ansatz_theta, resonant_theta, series_theta};

    fn field20() -> ControlField {
        ControlField::from_mhz(20.0, 1.5).unwrap()
    }

    #[test]
    fn flat_pulse_integrals() {
        let traj = resonant_theta(field20(), 10).unwrap();
        assert!((error_integral(&traj, SensitivityTarget::DetuningError).unwrap() - 2.0).abs() < 1e-12);
        assert!((error_integral(&traj, SensitivityTarget::RabiError).unwrap() - PI).abs() < 1e-12);
    }

    #[test]
    fn flat_pulse_transition_matches_rabi_oracle() {
        let f = field20();
        let traj = resonant_theta(f, 10).unwrap();
        let pulse = PulseSequence::flat_pi(f, 1).unwrap();
        for d in [0.005, 0.01, 0.02] {
            let p = perturbative_transition(&traj, &ErrorPair::new(d, 0.0)).unwrap();
            assert!((p - PI * PI * d * d / 4.0).abs() < 1e-15);
            let exact = 1.0 - final_population(&pulse, &ErrorPair::new(d, 0.0)).unwrap();
            assert!((p - exact).abs() <= 0.1 * exact);
            let dd = d * f.omega();
            let p = perturbative_transition(&traj, &ErrorPair::new(0.0, dd)).unwrap();
            assert!((p - d * d).abs() < 1e-15);
            let exact = 1.0 - final_population(&pulse, &ErrorPair::new(0.0, dd)).unwrap();
            assert!((p - exact).abs() <= 0.1 * exact);
        }
        assert_eq!(perturbative_transition(&traj, &ErrorPair::NONE).unwrap(), 0.0);
    }

    #[test]
    fn series_rabi_cancellation() {
        let traj = series_theta(&SeriesCoefficients::new(vec![-1.0]).unwrap(), field20(), 10).unwrap();
        let r = error_integral(&traj, SensitivityTarget::RabiError).unwrap();
        assert!(r <= 1e-4 * PI, "{r}");
    }

    #[test]
    fn ansatz_integrals_against_sampled_trapezoid() {
        let traj = ansatz_theta(AnsatzParameter::new(0.8).unwrap(), field20(), 20001).unwrap();
        let omega = traj.field().omega();
        let mut acc_d = Complex64::new(0.0, 0.0);
        let mut acc_r = Complex64::new(0.0, 0.0);
        let dt = traj.dt();
        for k in 0..traj.len() {
            let w = if k == 0 || k + 1 == traj.len() { 0.5 } else { 1.0 };
            let e = Complex64::from_polar(1.0, traj.eta()[k]);
            let s = traj.theta()[k].sin();
            acc_d += e * (w * dt * omega * s);
            acc_r += e * (w * dt * 2.0 * traj.theta_dot()[k] * s * s);
        }
        let j = error_integrals(&traj).unwrap();
        assert!((j.detuning - acc_d).norm() < 1e-6);
        assert!((j.rabi - acc_r).norm() < 1e-6);
    }

    #[test]
    fn optimizer_report_keys() {
        let opt = SensitivityOptimum {
            route: Route::Series,
            target: SensitivityTarget::RabiError,
            parameter: -1.0,
            residual: 0.0,
            duration_s: 5e-8,
            omega_t: 6.7,
        };
        let v = serde_json::to_value(&opt).unwrap();
        for key in ["route", "target", "parameter", "residual", "T_s", "qsl_omega_T"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["target"], "rabi-error");
    }

    #[test]
    fn parse_names() {
        assert_eq!("rabi-error".parse::<SensitivityTarget>().unwrap(), SensitivityTarget::RabiError);
        assert_eq!("series".parse::<Route>().unwrap(), Route::Series);
        assert!("both".parse::<SensitivityTarget>().is_err());
    }
}
