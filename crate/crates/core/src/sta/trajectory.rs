//! Sampled angle trajectories theta(t), beta(t), eta(t) of the invariant eigenstate.

use std::f64::consts::PI;

use super::profile::{AnsatzParameter, SeriesCoefficients, ThetaProfile};
use crate::error::{Error, Result};
use crate::numerics::ode::DormandPrince;
use crate::numerics::quadrature::integrate;
use crate::qubit::ControlField;

/// Samples used when a caller has no preference.
pub const DEFAULT_SAMPLES: usize = 2001;

/// Smallest sample count accepted by the ansatz route.
pub const MIN_ANSATZ_SAMPLES: usize = 100;

const QUAD_TOL: f64 = 1e-12;

/// theta, its derivatives, the azimuth beta and the global phase eta on a
/// uniform time grid from 0 to the pulse duration.
#[derive(Debug, Clone)]
pub struct AngleTrajectory {
    times: Vec<f64>,
    theta: Vec<f64>,
    theta_dot: Vec<f64>,
    theta_ddot: Vec<f64>,
    beta: Vec<f64>,
    cos_beta: Vec<f64>,
    eta: Vec<f64>,
    gamma_plus: Vec<f64>,
    duration: f64,
    field: ControlField,
    profile: ThetaProfile,
}

impl AngleTrajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_dot(&self) -> &[f64] {
        &self.theta_dot
    }

    pub fn theta_ddot(&self) -> &[f64] {
        &self.theta_ddot
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// cos(beta) as tracked on the continuous branch (exact zeros kept exact).
    pub fn cos_beta(&self) -> &[f64] {
        &self.cos_beta
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn gamma_plus(&self) -> &[f64] {
        &self.gamma_plus
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn field(&self) -> &ControlField {
        &self.field
    }

    pub fn profile(&self) -> &ThetaProfile {
        &self.profile
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Sample spacing.
    pub fn dt(&self) -> f64 {
        self.duration / (self.len() - 1) as f64
    }
}

fn uniform_times(duration: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| if k + 1 == n { duration } else { duration * k as f64 / (n - 1) as f64 }).collect()
}

/// Smooth ansatz trajectory; theta_dot = Omega at both ends so the detuning
/// starts and ends without jumps.
pub fn ansatz_theta(a: AnsatzParameter, field: ControlField, n_samples: usize) -> Result<AngleTrajectory> {
    if n_samples < MIN_ANSATZ_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "ansatz route needs at least {MIN_ANSATZ_SAMPLES} samples, got {n_samples}"
        )));
    }
    if !a.realizable() {
        return Err(Error::AnsatzThetaRange { a: a.value() });
    }
    let omega = field.omega();
    let duration = a.omega_t() / omega;
    let times = uniform_times(duration, n_samples);
    let mut theta = Vec::with_capacity(n_samples);
    let mut theta_dot = Vec::with_capacity(n_samples);
    let mut theta_ddot = Vec::with_capacity(n_samples);
    let mut beta = Vec::with_capacity(n_samples);
    let mut cos_beta = Vec::with_capacity(n_samples);
    for &t in &times {
        let s = t / duration;
        let rate = a.rate(s);
        if rate.abs() > 1.0 + 1e-12 {
            return Err(Error::ThetaRateExceedsRabi { t, rate: rate * omega, omega });
        }
        let cb = a.cos_beta(s);
        theta.push(a.theta(s));
        theta_dot.push(rate * omega);
        theta_ddot.push(a.accel_scaled(s) * omega / duration);
        beta.push((-rate).atan2(cb));
        cos_beta.push(cb);
    }
    let eta_rate = |t: f64| a.eta_rate_scaled(t / duration) / duration;
    let gamma_plus = cumulative(&times, |t| 0.5 * eta_rate(t));
    let eta = gamma_plus.iter().map(|g| 2.0 * g).collect();
    Ok(AngleTrajectory {
        times,
        theta,
        theta_dot,
        theta_ddot,
        beta,
        cos_beta,
        eta,
        gamma_plus,
        duration,
        field,
        profile: ThetaProfile::Ansatz { a },
    })
}

/// Omega T for the series route by integrating d(theta)/d(tau) = 1/w with
/// tau = Omega t until theta reaches pi. Returns the dense solution as well.
fn series_arrival(
    alphas: &SeriesCoefficients,
) -> Result<(crate::numerics::ode::OdeSolution<1>, f64)> {
    let solver = DormandPrince::new(1e-12, 1e-14);
    let tau_max = PI * alphas.w_bound() * 1.01 + 1.0;
    let (sol, hit) = solver.integrate_until(
        |_, y: &[f64; 1]| [alphas.rate(y[0])],
        0.0,
        [0.0],
        tau_max,
        |_, y| y[0] - PI,
    )?;
    let tau_end = hit.ok_or_else(|| Error::Integration(format!("theta did not reach pi by Omega t = {tau_max}")))?;
    Ok((sol, tau_end))
}

/// Series-route trajectory: theta obtained from the auxiliary equations with
/// sin(beta) = -1/w, and eta read off the phase expansion.
pub fn series_theta(alphas: &SeriesCoefficients, field: ControlField, n_samples: usize) -> Result<AngleTrajectory> {
    if n_samples < 4 {
        return Err(Error::InvalidParameter(format!("need at least 4 samples, got {n_samples}")));
    }
    let omega = field.omega();
    let (sol, tau_end) = series_arrival(alphas)?;
    let duration = tau_end / omega;
    let times = uniform_times(duration, n_samples);
    let theta: Vec<f64> = times
        .iter()
        .enumerate()
        .map(|(k, &t)| if k == 0 { 0.0 } else { sol.at(t * omega)[0] })
        .collect();
    let theta_dot = theta.iter().map(|&th| omega * alphas.rate(th)).collect();
    let theta_ddot = theta.iter().map(|&th| omega * omega * alphas.accel(th)).collect();
    let (beta, cos_beta): (Vec<f64>, Vec<f64>) = theta
        .iter()
        .map(|&th| {
            let (sb, cb) = alphas.sin_cos_beta(th);
            (sb.atan2(cb), cb)
        })
        .unzip();
    let eta: Vec<f64> = theta.iter().map(|&th| alphas.eta(th)).collect();
    let gamma_plus = series_gamma(alphas, &theta);
    Ok(AngleTrajectory {
        times,
        theta,
        theta_dot,
        theta_ddot,
        beta,
        cos_beta,
        eta,
        gamma_plus,
        duration,
        field,
        profile: ThetaProfile::Series { alphas: alphas.clone() },
    })
}

/// Resonant drive theta = Omega t with zero detuning: beta = -pi/2 throughout.
pub fn resonant_theta(field: ControlField, n_samples: usize) -> Result<AngleTrajectory> {
    if n_samples < 4 {
        return Err(Error::InvalidParameter(format!("need at least 4 samples, got {n_samples}")));
    }
    let omega = field.omega();
    let duration = PI / omega;
    let times = uniform_times(duration, n_samples);
    let theta = times.iter().map(|t| omega * t).collect();
    Ok(AngleTrajectory {
        times,
        theta,
        theta_dot: vec![omega; n_samples],
        theta_ddot: vec![0.0; n_samples],
        beta: vec![-PI / 2.0; n_samples],
        cos_beta: vec![0.0; n_samples],
        eta: vec![0.0; n_samples],
        gamma_plus: vec![0.0; n_samples],
        duration,
        field,
        profile: ThetaProfile::Resonant,
    })
}

/// gamma_+ = (1/2) int theta_dot * 2M dt = int M d(theta), accumulated between samples.
fn series_gamma(alphas: &SeriesCoefficients, theta: &[f64]) -> Vec<f64> {
    cumulative(theta, |th| alphas.m(th))
}

/// Running integral of `f` over consecutive sample intervals.
fn cumulative<F: Fn(f64) -> f64>(nodes: &[f64], f: F) -> Vec<f64> {
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    out.push(0.0);
    for pair in nodes.windows(2) {
        acc += integrate(&f, pair[0], pair[1], QUAD_TOL, 1e-13).value;
        out.push(acc);
    }
    out
}

/// gamma_+(t) = (1/2) int Omega cos(beta) / sin(theta) dt, recomputed from the
/// trajectory's generating profile.
pub fn lr_phase(traj: &AngleTrajectory) -> Vec<f64> {
    match traj.profile() {
        ThetaProfile::Resonant => vec![0.0; traj.len()],
        ThetaProfile::Series { alphas } => series_gamma(alphas, traj.theta()),
        ThetaProfile::Ansatz { a } => {
            let duration = traj.duration();
            cumulative(traj.times(), |t| 0.5 * a.eta_rate_scaled(t / duration) / duration)
        }
    }
}

/// Omega T of the series route found by integration rather than quadrature.
pub fn series_omega_t(alphas: &SeriesCoefficients) -> Result<f64> {
    series_arrival(alphas).map(|(_, tau)| tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field20() -> ControlField {
        ControlField::from_mhz(20.0, 1.5).unwrap()
    }

    #[test]
    fn ansatz_durations() {
        let t1 = ansatz_theta(AnsatzParameter::new(0.604).unwrap(), field20(), 200).unwrap().duration();
        let t2 = ansatz_theta(AnsatzParameter::new(0.728).unwrap(), field20(), 200).unwrap().duration();
        assert!((t1 * 1e9 - 60.6).abs() < 0.1, "{t1}");
        assert!((t2 * 1e9 - 48.8).abs() < 0.1, "{t2}");
    }

    #[test]
    fn ansatz_boundary_conditions() {
        let f = field20();
        let traj = ansatz_theta(AnsatzParameter::new(0.604).unwrap(), f, 2001).unwrap();
        let n = traj.len() - 1;
        assert_eq!(traj.theta()[0], 0.0);
        assert!((traj.theta()[n] - PI).abs() < 1e-12);
        for k in [0, n] {
            assert!((traj.theta_dot()[k] / f.omega() - 1.0).abs() < 1e-12);
            assert!(traj.theta_ddot()[k].abs() * traj.duration() / f.omega() < 1e-12);
            assert!((traj.beta()[k] + PI / 2.0).abs() < 1e-12);
        }
        // one-sided finite differences of theta at the ends
        let dt = traj.dt();
        let fd0 = (-3.0 * traj.theta()[0] + 4.0 * traj.theta()[1] - traj.theta()[2]) / (2.0 * dt);
        assert!((fd0 / f.omega() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn ansatz_rejects_few_samples() {
        assert!(ansatz_theta(AnsatzParameter::new(0.7).unwrap(), field20(), 99).is_err());
    }

    #[test]
    fn series_empty_arrival_matches_quadrature_oracle() {
        // int_0^pi sqrt(1 + 4 sin^2) by composite Simpson with many panels
        let n = 200_000;
        let h = PI / n as f64;
        let g = |x: f64| (1.0 + 4.0 * x.sin().powi(2)).sqrt();
        let simpson: f64 = (0..n)
            .map(|i| {
                let a = i as f64 * h;
                h / 6.0 * (g(a) + 4.0 * g(a + 0.5 * h) + g(a + h))
            })
            .sum();
        let tau = series_omega_t(&SeriesCoefficients::empty()).unwrap();
        assert!((tau - simpson).abs() < 1e-9, "{tau} vs {simpson}");
        assert!((tau - 5.270).abs() < 1e-3);
    }

    #[test]
    fn series_durations() {
        let f = field20();
        let t_rabi = series_theta(&SeriesCoefficients::new(vec![-1.0]).unwrap(), f, 100).unwrap();
        assert!((t_rabi.duration() * 1e9 - 53.9).abs() < 0.2);
        let t = series_theta(&SeriesCoefficients::new(vec![-1.4657]).unwrap(), f, 100).unwrap();
        assert!((t.duration() * 1e9 - 60.2).abs() < 0.2, "{}", t.duration());
    }

    #[test]
    fn series_empty_phase_ends_at_two_pi() {
        let traj = series_theta(&SeriesCoefficients::empty(), field20(), 500).unwrap();
        let last = traj.len() - 1;
        assert!((traj.eta()[last] - 2.0 * PI).abs() < 1e-8);
        assert!((2.0 * traj.gamma_plus()[last] - 2.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn resonant_phases_vanish() {
        let traj = resonant_theta(field20(), 50).unwrap();
        assert!(lr_phase(&traj).iter().all(|&g| g == 0.0));
        assert!((traj.theta()[49] - PI).abs() < 1e-15);
    }

    #[test]
    fn ansatz_eta_is_twice_gamma() {
        let traj = ansatz_theta(AnsatzParameter::new(0.9).unwrap(), field20(), 300).unwrap();
        for (e, g) in traj.eta().iter().zip(lr_phase(&traj)) {
            assert!((e - 2.0 * g).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn series_trajectory_invariants(a1 in -2.5f64..2.5, a2 in -0.8f64..0.8) {
            let f = field20();
            let alphas = SeriesCoefficients::new(vec![a1, a2]).unwrap();
            let traj = series_theta(&alphas, f, 200).unwrap();
            let last = traj.len() - 1;
            prop_assert_eq!(traj.theta()[0], 0.0);
            prop_assert!((traj.theta()[last] - PI).abs() <= 1e-6);
            prop_assert!(traj.theta_dot().iter().all(|&d| d.abs() <= f.omega() * (1.0 + 1e-12)));
            for (e, g) in traj.eta().iter().zip(traj.gamma_plus()) {
                prop_assert!((e - 2.0 * g).abs() < 1e-9, "{} vs {}", e, 2.0 * g);
            }
        }

        #[test]
        fn ansatz_trajectory_invariants(a in 0.427f64..3.0) {
            let f = field20();
            let traj = ansatz_theta(AnsatzParameter::new(a).unwrap(), f, 150).unwrap();
            let last = traj.len() - 1;
            prop_assert_eq!(traj.theta()[0], 0.0);
            prop_assert!((traj.theta()[last] - PI).abs() <= 1e-6);
            prop_assert!(traj.theta_dot().iter().all(|&d| d.abs() <= f.omega() * (1.0 + 1e-12)));
            let h = 1e-6;
            for s in [0.0, 1.0] {
                let p = AnsatzParameter::new(a).unwrap();
                let ds = if s == 0.0 { h } else { -h };
                let fd_rate = (p.theta(s + ds) - p.theta(s)) / ds / p.omega_t();
                prop_assert!((fd_rate - 1.0).abs() < 1e-5);
            }
        }
    }
}
