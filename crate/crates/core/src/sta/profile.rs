//! Closed-form angle profiles for inverse engineering.
//!
//! The invariant eigenstate |phi+> sits at polar angle theta and azimuth beta
//! on the Bloch sphere; with fixed Rabi frequency the auxiliary equations are
//! theta' = -Omega sin(beta) and beta' = -Omega cot(theta) cos(beta) + Delta.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound on the ansatz parameter: a must exceed 2 - pi^2/6.
pub const ANSATZ_A_MIN: f64 = 2.0 - PI * PI / 6.0;

/// Below this value theta(s) overshoots [0, pi] inside (0, 1): it returns to
/// zero near s = 0.722 (and to pi near s = 0.278), where the cot(theta) term
/// of the detuning diverges. Equals max over s of -h(s)/s with
/// h(s) = (pi^2/6) s^2 (3 - 2s) - 2 sin^2(pi s / 2).
pub const ANSATZ_A_INTERIOR: f64 = 0.426_616_651_645_864_1;

/// Free parameter of the smooth polynomial-trigonometric ansatz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct AnsatzParameter(f64);

impl AnsatzParameter {
    pub fn new(a: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::NonFinite("ansatz parameter"));
        }
        if a <= ANSATZ_A_MIN {
            return Err(Error::AnsatzDomain { a });
        }
        Ok(Self(a))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// Whether theta stays inside [0, pi], so that a finite detuning exists.
    pub fn realizable(&self) -> bool {
        self.0 > ANSATZ_A_INTERIOR
    }

    /// Omega * T = pi a / (a - 2 + pi^2/6).
    pub fn omega_t(&self) -> f64 {
        PI * self.0 / (self.0 - ANSATZ_A_MIN)
    }

    /// theta / (Omega T) at s = t/T, written to avoid cancellation near s = 0:
    /// [a s + (pi^2/6) s^2 (3 - 2s) - 2 sin^2(pi s / 2)] / a.
    fn theta_scaled(&self, s: f64) -> f64 {
        let a = self.0;
        (a * s + PI * PI / 6.0 * s * s * (3.0 - 2.0 * s) - 2.0 * (0.5 * PI * s).sin().powi(2)) / a
    }

    /// theta(s) in radians.
    pub fn theta(&self, s: f64) -> f64 {
        self.omega_t() * self.theta_scaled(s)
    }

    /// g(s) = pi^2 s (1 - s) - pi sin(pi s); symmetric about s = 1/2.
    fn g(s: f64) -> f64 {
        let u = s.min(1.0 - s);
        let x = PI * u;
        -PI * PI * u * u + PI * x_minus_sin(x)
    }

    /// theta_dot / Omega = 1 + g(s)/a.
    pub fn rate(&self, s: f64) -> f64 {
        1.0 + Self::g(s) / self.0
    }

    /// 1 - theta_dot/Omega, without cancellation near the endpoints.
    fn rate_deficit(&self, s: f64) -> f64 {
        -Self::g(s) / self.0
    }

    /// theta_ddot * T / Omega = [pi^2 (1 - 2s) - pi^2 cos(pi s)] / a.
    pub fn accel_scaled(&self, s: f64) -> f64 {
        PI * PI * ((1.0 - 2.0 * s) - (PI * s).cos()) / self.0
    }

    /// cos(beta) on the branch cos(beta) >= 0, i.e. sqrt(1 - (theta_dot/Omega)^2).
    pub fn cos_beta(&self, s: f64) -> f64 {
        let d = self.rate_deficit(s);
        (d * (2.0 - d)).max(0.0).sqrt()
    }

    /// T * d(eta)/dt = Omega T cos(beta) / sin(theta), with its finite limit
    /// pi sqrt(2/a) at both endpoints.
    pub fn eta_rate_scaled(&self, s: f64) -> f64 {
        let edge = s.min(1.0 - s);
        if edge < 1e-9 {
            return PI * (2.0 / self.0).sqrt();
        }
        self.omega_t() * self.cos_beta(s) / self.theta(s).sin()
    }
}

impl TryFrom<f64> for AnsatzParameter {
    type Error = Error;
    fn try_from(a: f64) -> Result<Self> {
        Self::new(a)
    }
}

impl From<AnsatzParameter> for f64 {
    fn from(a: AnsatzParameter) -> f64 {
        a.0
    }
}

/// x - sin(x), accurate for small x.
fn x_minus_sin(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let x2 = x * x;
        x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0 * (1.0 - x2 / 110.0))))
    } else {
        x - x.sin()
    }
}

/// Coefficients alpha_1..alpha_n of the global-phase expansion
/// eta = 2 theta + sum_n alpha_n sin(2 n theta).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SeriesCoefficients(Vec<f64>);

impl SeriesCoefficients {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("series coefficient"));
        }
        Ok(Self(alphas))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn alphas(&self) -> &[f64] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    fn terms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.0.iter().enumerate().map(|(i, &a)| ((i + 1) as f64, a))
    }

    /// M = 1 + sum n alpha_n cos(2 n theta); d(eta)/d(theta) = 2M.
    pub fn m(&self, theta: f64) -> f64 {
        1.0 + self.terms().map(|(n, a)| n * a * (2.0 * n * theta).cos()).sum::<f64>()
    }

    /// dM/d(theta) = -2 sum n^2 alpha_n sin(2 n theta).
    pub fn m_prime(&self, theta: f64) -> f64 {
        -2.0 * self.terms().map(|(n, a)| n * n * a * (2.0 * n * theta).sin()).sum::<f64>()
    }

    pub fn eta(&self, theta: f64) -> f64 {
        2.0 * theta + self.terms().map(|(n, a)| a * (2.0 * n * theta).sin()).sum::<f64>()
    }

    /// sqrt(1 + 4 M^2 sin^2 theta); Omega dt = w d(theta) along the trajectory.
    pub fn w(&self, theta: f64) -> f64 {
        let ms = 2.0 * self.m(theta) * theta.sin();
        (1.0 + ms * ms).sqrt()
    }

    /// theta_dot / Omega = 1 / w.
    pub fn rate(&self, theta: f64) -> f64 {
        1.0 / self.w(theta)
    }

    /// theta_ddot / Omega^2 = -(4 M M' sin^2 + 4 M^2 sin cos) / w^4.
    pub fn accel(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let m = self.m(theta);
        let w2 = 1.0 + 4.0 * m * m * s * s;
        -(4.0 * m * self.m_prime(theta) * s * s + 4.0 * m * m * s * c) / (w2 * w2)
    }

    /// (sin(beta), cos(beta)) = (-1, 2 M sin(theta)) / w.
    pub fn sin_cos_beta(&self, theta: f64) -> (f64, f64) {
        let w = self.w(theta);
        (-1.0 / w, 2.0 * self.m(theta) * theta.sin() / w)
    }

    /// Upper bound on w over [0, pi], used to bound the arrival time.
    pub fn w_bound(&self) -> f64 {
        let m_max = 1.0 + self.terms().map(|(n, a)| n * a.abs()).sum::<f64>();
        (1.0 + 4.0 * m_max * m_max).sqrt()
    }
}

impl TryFrom<Vec<f64>> for SeriesCoefficients {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SeriesCoefficients> for Vec<f64> {
    fn from(c: SeriesCoefficients) -> Vec<f64> {
        c.0
    }
}

/// What generated an angle trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaProfile {
    /// theta = Omega t, zero detuning (flat pi pulse).
    Resonant,
    Ansatz { a: AnsatzParameter },
    Series { alphas: SeriesCoefficients },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_theta(a: f64, s: f64) -> f64 {
        let big_a = PI * PI / 6.0 - 1.0;
        let omega_t = -PI * a / (2.0 - a - PI * PI / 6.0);
        omega_t / a
            * (a * s - PI * PI / 2.0 * (1.0 - s).powi(2) + PI * PI / 3.0 * (1.0 - s).powi(3) + (PI * s).cos() + big_a)
    }

    #[test]
    fn stable_form_matches_literal_ansatz() {
        let a = AnsatzParameter::new(0.604).unwrap();
        for i in 0..=20 {
            let s = i as f64 / 20.0;
            assert!((a.theta(s) - direct_theta(0.604, s)).abs() < 1e-13);
        }
        // the rate is symmetric about s = 1/2, so theta passes pi/2 there
        assert!((a.theta(0.5) - PI / 2.0).abs() < 1e-13);
        assert!((a.theta(1.0) - PI).abs() < 1e-13);
    }

    #[test]
    fn ansatz_domain() {
        assert!(AnsatzParameter::new(0.355).is_err());
        assert!(AnsatzParameter::new(ANSATZ_A_MIN).is_err());
        assert!(AnsatzParameter::new(0.356).is_ok());
        assert!(AnsatzParameter::new(f64::NAN).is_err());
    }

    #[test]
    fn interior_bound_is_where_theta_touches_zero() {
        let h = |s: f64| PI * PI / 6.0 * s * s * (3.0 - 2.0 * s) - 2.0 * (0.5 * PI * s).sin().powi(2);
        let worst = (1..=100_000).map(|k| -h(k as f64 * 1e-5) / (k as f64 * 1e-5)).fold(f64::MIN, f64::max);
        assert!((worst - ANSATZ_A_INTERIOR).abs() < 1e-9, "{worst}");
        let min_theta = |a: f64| {
            let p = AnsatzParameter::new(a).unwrap();
            (0..=10_000).map(|k| p.theta(k as f64 * 1e-4)).fold(f64::MAX, f64::min)
        };
        assert!(min_theta(ANSATZ_A_INTERIOR + 1e-6) > -1e-9);
        assert!(min_theta(ANSATZ_A_INTERIOR - 1e-3) < -1e-3);
        assert!(!AnsatzParameter::new(0.4).unwrap().realizable());
        assert!(AnsatzParameter::new(0.43).unwrap().realizable());
    }

    #[test]
    fn ansatz_derivatives_against_finite_differences() {
        let a = AnsatzParameter::new(0.728).unwrap();
        let h = 1e-5;
        for i in 1..20 {
            let s = i as f64 / 20.0;
            let fd_rate = (a.theta(s + h) - a.theta(s - h)) / (2.0 * h) / a.omega_t();
            assert!((fd_rate - a.rate(s)).abs() < 1e-8);
            let fd_accel = (a.rate(s + h) - a.rate(s - h)) / (2.0 * h);
            assert!((fd_accel - a.accel_scaled(s)).abs() < 1e-7);
        }
    }

    #[test]
    fn x_minus_sin_branches_agree() {
        for x in [0.05, 0.0999, 0.1, 0.1001] {
            let series = {
                let x2: f64 = x * x;
                x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0 * (1.0 - x2 / 110.0))))
            };
            assert!((series - (x - f64::sin(x))).abs() < 1e-16);
        }
    }

    #[test]
    fn eta_derivative_is_two_m() {
        let c = SeriesCoefficients::new(vec![-1.3, 0.4, 0.2]).unwrap();
        let h = 1e-6;
        for i in 1..30 {
            let th = PI * i as f64 / 30.0;
            let fd = (c.eta(th + h) - c.eta(th - h)) / (2.0 * h);
            let exact = 2.0 * c.m(th);
            assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{fd} vs {exact}");
        }
    }

    #[test]
    fn series_accel_against_finite_differences() {
        let c = SeriesCoefficients::new(vec![0.7, -0.2]).unwrap();
        let h = 1e-6;
        for i in 1..30 {
            let th = PI * i as f64 / 30.0;
            // d(rate)/dt / Omega = d(rate)/d(theta) * rate
            let fd = (c.rate(th + h) - c.rate(th - h)) / (2.0 * h) * c.rate(th);
            assert!((fd - c.accel(th)).abs() < 1e-8);
        }
    }

    #[test]
    fn beta_is_on_unit_circle_and_starts_at_minus_half_pi() {
        let c = SeriesCoefficients::new(vec![-1.74]).unwrap();
        let (s0, c0) = c.sin_cos_beta(0.0);
        assert_eq!((s0, c0), (-1.0, 0.0));
        for i in 0..=10 {
            let (s, co) = c.sin_cos_beta(PI * i as f64 / 10.0);
            assert!((s * s + co * co - 1.0).abs() < 1e-14);
        }
    }
}
