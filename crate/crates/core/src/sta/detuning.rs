//! Detuning waveforms obtained by inverting the auxiliary equations.

use serde::{Deserialize, Serialize};

use super::profile::{SeriesCoefficients, ThetaProfile};
use super::trajectory::AngleTrajectory;
use crate::error::{Error, Result};
use crate::qubit::{ControlField, PulseSequence};

/// Detuning sampled on a uniform time grid; values in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousPulse {
    times: Vec<f64>,
    deltas: Vec<f64>,
    field: ControlField,
}

impl ContinuousPulse {
    pub fn new(times: Vec<f64>, deltas: Vec<f64>, field: ControlField) -> Result<Self> {
        if times.len() != deltas.len() || times.len() < 2 {
            return Err(Error::InvalidParameter("pulse needs matching times and values, at least two".into()));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("pulse times must start at 0 and increase".into()));
        }
        if deltas.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite("detuning sample"));
        }
        Ok(Self { times, deltas, field })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn field(&self) -> &ControlField {
        &self.field
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    /// max |Delta|
    pub fn peak(&self) -> f64 {
        self.deltas.iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// Cubic Lagrange interpolation through the four samples around `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if n < 4 {
            let k = self.times.partition_point(|&x| x <= t).clamp(1, n - 1);
            let (t0, t1) = (self.times[k - 1], self.times[k]);
            let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
            return self.deltas[k - 1] * (1.0 - w) + self.deltas[k] * w;
        }
        let t = t.clamp(0.0, self.duration());
        let k = self.times.partition_point(|&x| x <= t).saturating_sub(1);
        let start = k.saturating_sub(1).min(n - 4);
        let xs = &self.times[start..start + 4];
        let ys = &self.deltas[start..start + 4];
        let mut acc = 0.0;
        for i in 0..4 {
            let mut basis = 1.0;
            for j in 0..4 {
                if i != j {
                    basis *= (t - xs[j]) / (xs[i] - xs[j]);
                }
            }
            acc += basis * ys[i];
        }
        acc
    }
}

/// Fill the two end samples by quadratic extrapolation from the three nearest
/// interior ones (uniform grid).
fn extrapolate_ends(values: &mut [f64]) {
    let n = values.len();
    values[0] = 3.0 * values[1] - 3.0 * values[2] + values[3];
    values[n - 1] = 3.0 * values[n - 2] - 3.0 * values[n - 3] + values[n - 4];
}

/// Delta = -theta_ddot / (Omega cos(beta)) + Omega cot(theta) cos(beta), with
/// cos(beta) taken from the tracked branch.
pub fn detuning_from_theta(traj: &AngleTrajectory) -> Result<ContinuousPulse> {
    let omega = traj.field().omega();
    let n = traj.len();
    if n < 4 {
        return Err(Error::InvalidParameter("trajectory too short for endpoint extrapolation".into()));
    }
    let mut deltas = vec![0.0; n];
    for k in 1..n - 1 {
        let t = traj.times()[k];
        let rate = traj.theta_dot()[k];
        if rate.abs() > omega * (1.0 + 1e-12) {
            return Err(Error::ThetaRateExceedsRabi { t, rate, omega });
        }
        let cb = traj.cos_beta()[k];
        let accel = traj.theta_ddot()[k];
        let first = if accel == 0.0 {
            0.0
        } else if cb == 0.0 {
            return Err(Error::SingularDetuning { t });
        } else {
            -accel / (omega * cb)
        };
        let second = if cb == 0.0 { 0.0 } else { omega * cb / traj.theta()[k].tan() };
        deltas[k] = first + second;
        if !deltas[k].is_finite() {
            return Err(Error::SingularDetuning { t });
        }
    }
    extrapolate_ends(&mut deltas);
    ContinuousPulse::new(traj.times().to_vec(), deltas, *traj.field())
}

/// Closed-form series detuning
/// Delta = [-4 theta_dot sin(theta) sum n^2 alpha_n sin(2 n theta) + 2 M theta_dot cos(theta)] / w^2
///         + 2 M Omega cos(theta) / w.
pub fn detuning_series_closed_form(traj: &AngleTrajectory, alphas: &SeriesCoefficients) -> Result<ContinuousPulse> {
    match traj.profile() {
        ThetaProfile::Series { alphas: own } if own == alphas => {}
        _ => return Err(Error::MismatchedCoefficients),
    }
    let omega = traj.field().omega();
    let deltas = traj
        .theta()
        .iter()
        .zip(traj.theta_dot())
        .map(|(&th, &rate)| series_detuning_at(alphas, omega, th, rate))
        .collect();
    ContinuousPulse::new(traj.times().to_vec(), deltas, *traj.field())
}

/// Closed-form series detuning at one (theta, theta_dot) pair.
pub fn series_detuning_at(alphas: &SeriesCoefficients, omega: f64, theta: f64, theta_dot: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let m = alphas.m(theta);
    let w2 = 1.0 + 4.0 * m * m * s * s;
    // -4 sum n^2 alpha_n sin(2 n theta) = 2 M'
    let numer = 2.0 * alphas.m_prime(theta) * theta_dot * s + 2.0 * m * theta_dot * c;
    numer / w2 + 2.0 * m * omega * c / w2.sqrt()
}

/// Midpoint sampling onto `n_steps` equal steps. The field's detuning bound
/// is raised to the pulse peak when needed so the sequence stays valid.
pub fn discretize(pulse: &ContinuousPulse, n_steps: usize) -> Result<PulseSequence> {
    if n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be >= 1".into()));
    }
    let dt = pulse.duration() / n_steps as f64;
    let deltas: Vec<f64> = (0..n_steps).map(|k| pulse.value_at((k as f64 + 0.5) * dt)).collect();
    let peak = deltas.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let field = pulse.field().with_delta_max(pulse.field().delta_max().max(peak))?;
    PulseSequence::new(dt, deltas, field)
}
