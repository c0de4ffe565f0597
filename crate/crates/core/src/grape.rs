//! First-order GRAPE over piecewise-constant detuning amplitudes.
//!
//! Figure of merit f = |<1| U_M ... U_1 |0>|^2 with
//! U_k = exp(-i dt (Omega sigma_x + u_k sigma_z) / 2). The Hessian is replaced
//! by the identity, so each iteration is a (line-searched) gradient step.

use std::io::Write;

use nalgebra::Vector2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::scan::fmt_f64;
use crate::qubit::{final_population, step_unitary, CMat2, ControlField, ErrorPair, PulseSequence};

type CVec2 = Vector2<Complex64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GrapeInit {
    /// Linear sweep from -delta_max to +delta_max (rad/s) across the steps.
    LinearRamp { delta_max: f64 },
    Constant { value: f64 },
    Custom { amplitudes: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrapeConfig {
    pub m_steps: usize,
    /// Seconds.
    pub total_time: f64,
    /// Step size for amplitudes measured in units of Omega.
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub init: GrapeInit,
    pub target_fidelity: f64,
    #[serde(default = "default_line_search")]
    pub line_search: bool,
}

fn default_line_search() -> bool {
    true
}

impl GrapeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_steps == 0 {
            return Err(Error::InvalidParameter("m_steps must be >= 1".into()));
        }
        if !(self.total_time.is_finite() && self.total_time > 0.0) {
            return Err(Error::InvalidParameter(format!("total_time must be > 0, got {}", self.total_time)));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if !(0.0..=1.0).contains(&self.target_fidelity) {
            return Err(Error::InvalidParameter(format!("target_fidelity must be in [0, 1], got {}", self.target_fidelity)));
        }
        if let GrapeInit::Custom { amplitudes } = &self.init {
            if amplitudes.len() != self.m_steps {
                return Err(Error::InvalidParameter(format!(
                    "custom init has {} amplitudes, expected {}",
                    amplitudes.len(),
                    self.m_steps
                )));
            }
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.total_time / self.m_steps as f64
    }

    pub fn initial_amplitudes(&self) -> Vec<f64> {
        let m = self.m_steps;
        match &self.init {
            GrapeInit::LinearRamp { delta_max } => {
                if m == 1 {
                    vec![0.0]
                } else {
                    (0..m).map(|k| delta_max * (-1.0 + 2.0 * k as f64 / (m - 1) as f64)).collect()
                }
            }
            GrapeInit::Constant { value } => vec![*value; m],
            GrapeInit::Custom { amplitudes } => amplitudes.clone(),
        }
    }
}

fn check_amplitudes(amplitudes: &[f64], cfg: &GrapeConfig) -> Result<()> {
    if amplitudes.len() != cfg.m_steps {
        return Err(Error::InvalidParameter(format!(
            "expected {} amplitudes, got {}",
            cfg.m_steps,
            amplitudes.len()
        )));
    }
    if amplitudes.iter().any(|u| !u.is_finite()) {
        return Err(Error::NonFinite("GRAPE amplitude"));
    }
    Ok(())
}

/// Amplitudes as a pulse on `field`; the bound is widened if an amplitude exceeds it.
pub fn amplitudes_to_pulse(amplitudes: &[f64], cfg: &GrapeConfig, field: &ControlField) -> Result<PulseSequence> {
    check_amplitudes(amplitudes, cfg)?;
    let peak = amplitudes.iter().fold(0.0f64, |m, u| m.max(u.abs()));
    let field = field.with_delta_max(field.delta_max().max(peak))?;
    PulseSequence::new(cfg.dt(), amplitudes.to_vec(), field)
}

/// Final |1> population from |0>, through the shared simulator.
pub fn grape_fidelity(amplitudes: &[f64], cfg: &GrapeConfig, field: &ControlField) -> Result<f64> {
    final_population(&amplitudes_to_pulse(amplitudes, cfg, field)?, &ErrorPair::NONE)
}

/// dU/du for U = exp(-i dt (omega sigma_x + u sigma_z) / 2).
fn step_unitary_derivative(omega: f64, u: f64, dt: f64) -> CMat2 {
    let r = omega.hypot(u);
    let phi = 0.5 * r * dt;
    let (sin, cos) = phi.sin_cos();
    let dphi = 0.5 * dt * u / r;
    // U = cos(phi) I - i (sin(phi)/r) (omega sigma_x + u sigma_z)
    let s = sin / r;
    let ds = u / r * (cos * 0.5 * dt - s) / r;
    let c = Complex64::new;
    let d_cos = -sin * dphi;
    // -i [ds (omega sigma_x + u sigma_z) + s sigma_z]
    let dz = ds * u + s;
    let dx = ds * omega;
    CMat2::new(c(d_cos, -dz), c(0.0, -dx), c(0.0, -dx), c(d_cos, dz))
}

/// Exact gradient of the figure of merit with respect to every amplitude.
pub fn grape_gradient(amplitudes: &[f64], cfg: &GrapeConfig, field: &ControlField) -> Result<Vec<f64>> {
    check_amplitudes(amplitudes, cfg)?;
    let dt = cfg.dt();
    let omega = field.omega();
    let unitaries: Vec<CMat2> = amplitudes.iter().map(|&u| step_unitary(omega, u, dt)).collect();
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);

    let mut forward = Vec::with_capacity(amplitudes.len() + 1);
    forward.push(CVec2::new(one, zero));
    for u in &unitaries {
        let next = u * forward.last().expect("seeded");
        forward.push(next);
    }
    let amp = forward.last().expect("seeded")[1];

    // backward row vectors <1| U_M ... U_{k+1}
    let mut back = vec![CVec2::new(zero, one).transpose(); amplitudes.len()];
    for k in (0..amplitudes.len().saturating_sub(1)).rev() {
        back[k] = back[k + 1] * unitaries[k + 1];
    }
    let grad = (0..amplitudes.len())
        .map(|k| {
            let d = step_unitary_derivative(omega, amplitudes[k], dt);
            let da = (back[k] * d * forward[k])[0];
            2.0 * (amp.conj() * da).re
        })
        .collect();
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrapeStatus {
    Converged,
    MaxIterations,
    /// Gradient vanished, or no step improved f, below the target.
    LocalOptimum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrapeResult {
    pub amplitudes: Vec<f64>,
    /// Fidelity before the first update, then after every accepted update.
    pub history: Vec<f64>,
    pub status: GrapeStatus,
}

impl GrapeResult {
    pub fn fidelity(&self) -> f64 {
        *self.history.last().expect("history starts with the initial fidelity")
    }

    pub fn iterations(&self) -> usize {
        self.history.len() - 1
    }

    pub fn write_history_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,fidelity")?;
        for (i, f) in self.history.iter().enumerate() {
            writeln!(out, "{i},{}", fmt_f64(*f))?;
        }
        Ok(())
    }
}

/// Gradient ascent u <- u + eps Omega^2 grad f, clipped to the field bound.
pub fn grape_optimize(cfg: &GrapeConfig, field: &ControlField) -> Result<GrapeResult> {
    cfg.validate()?;
    let bound = field.delta_max();
    let clip = |u: f64| u.clamp(-bound, bound);
    let mut u: Vec<f64> = cfg.initial_amplitudes().into_iter().map(clip).collect();
    let mut f = grape_fidelity(&u, cfg, field)?;
    let mut history = vec![f];
    let scale = cfg.learning_rate * field.omega() * field.omega();
    let mut status = GrapeStatus::MaxIterations;

    for _ in 0..cfg.max_iterations {
        if f >= cfg.target_fidelity {
            status = GrapeStatus::Converged;
            break;
        }
        let grad = grape_gradient(&u, cfg, field)?;
        let norm = grad.iter().map(|g| (g * field.omega()).powi(2)).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::Diverged("non-finite GRAPE gradient".into()));
        }
        if norm < 1e-10 {
            status = GrapeStatus::LocalOptimum;
            break;
        }
        let mut step = scale;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = u.iter().zip(&grad).map(|(x, g)| clip(x + step * g)).collect();
            let f_trial = grape_fidelity(&trial, cfg, field)?;
            if !cfg.line_search || f_trial >= f {
                accepted = Some((trial, f_trial));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((trial, f_trial)) => {
                u = trial;
                f = f_trial;
                history.push(f);
            }
            None => {
                status = GrapeStatus::LocalOptimum;
                break;
            }
        }
    }
    if status == GrapeStatus::MaxIterations && f >= cfg.target_fidelity {
        status = GrapeStatus::Converged;
    }
    Ok(GrapeResult { amplitudes: u, history, status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn field() -> ControlField {
        ControlField::from_mhz(20.0, 10.0).unwrap()
    }

    fn cfg(m: usize, total_time: f64, init: GrapeInit) -> GrapeConfig {
        GrapeConfig {
            m_steps: m,
            total_time,
            learning_rate: 1.0,
            max_iterations: 2000,
            init,
            target_fidelity: 0.999,
            line_search: true,
        }
    }

    #[test]
    fn fidelity_of_resonant_pulses() {
        let f = field();
        let pi_time = PI / f.omega();
        let c = cfg(10, pi_time, GrapeInit::Constant { value: 0.0 });
        assert!((grape_fidelity(&[0.0; 10], &c, &f).unwrap() - 1.0).abs() < 1e-12);
        let half = cfg(10, pi_time / 2.0, GrapeInit::Constant { value: 0.0 });
        assert!((grape_fidelity(&[0.0; 10], &half, &f).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let f = field();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let c = cfg(12, 55e-9, GrapeInit::Constant { value: 0.0 });
            let u: Vec<f64> = (0..12).map(|_| rng.gen_range(-3.0..3.0) * f.omega()).collect();
            let g = grape_gradient(&u, &c, &f).unwrap();
            let h = 1e-5 * f.omega();
            for k in 0..12 {
                let mut up = u.clone();
                let mut dn = u.clone();
                up[k] += h;
                dn[k] -= h;
                let fd = (grape_fidelity(&up, &c, &f).unwrap() - grape_fidelity(&dn, &c, &f).unwrap()) / (2.0 * h);
                let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                assert!((fd - g[k]).abs() <= 1e-6 * scale, "k={k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn gradient_vanishes_at_flat_pi_pulse() {
        let f = field();
        let c = cfg(20, PI / f.omega(), GrapeInit::Constant { value: 0.0 });
        let g = grape_gradient(&[0.0; 20], &c, &f).unwrap();
        let norm = g.iter().map(|x| (x * f.omega()).powi(2)).sum::<f64>().sqrt();
        assert!(norm <= 1e-8, "{norm}");
    }

    #[test]
    fn already_optimal_needs_no_iterations() {
        let f = field();
        let r = grape_optimize(&cfg(20, PI / f.omega(), GrapeInit::Constant { value: 0.0 }), &f).unwrap();
        assert_eq!(r.iterations(), 0);
        assert_eq!(r.status, GrapeStatus::Converged);
    }

    #[test]
    fn linear_init_converges_monotonically() {
        let f = field();
        let c = cfg(20, 55e-9, GrapeInit::LinearRamp { delta_max: 2.5 * f.omega() });
        let r = grape_optimize(&c, &f).unwrap();
        assert_eq!(r.status, GrapeStatus::Converged);
        assert!(r.fidelity() > 0.999);
        assert!(r.history.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn custom_init_length_checked() {
        let c = cfg(3, 1e-8, GrapeInit::Custom { amplitudes: vec![0.0; 2] });
        assert!(c.validate().is_err());
    }
}
