//! Exact propagation under H = (hbar/2)[Omega (1 + dOmega) sigma_x + (Delta + dDelta) sigma_z].
//!
//! For a constant Hamiltonian the propagator is a rotation:
//! U = cos(phi) I - i sin(phi) (n . sigma), phi = |v| dt / 2, n = v / |v|.

use num_complex::Complex64;

use super::control::{ControlField, ErrorPair, PulseSequence};
use super::state::{CMat2, DensityMatrix};
use crate::error::{ensure_finite, Error, Result};

/// exp(-i dt (rabi sigma_x + detuning sigma_z) / 2)
pub fn step_unitary(rabi: f64, detuning: f64, dt: f64) -> CMat2 {
    let norm = rabi.hypot(detuning);
    let phi = 0.5 * norm * dt;
    let (s, c) = phi.sin_cos();
    if norm == 0.0 {
        return CMat2::identity();
    }
    let nx = rabi / norm;
    let nz = detuning / norm;
    CMat2::new(
        Complex64::new(c, -s * nz),
        Complex64::new(0.0, -s * nx),
        Complex64::new(0.0, -s * nx),
        Complex64::new(c, s * nz),
    )
}

/// Rabi frequency and detuning actually seen by the qubit once the
/// systematic errors are applied.
pub fn effective_controls(field: &ControlField, delta: f64, err: &ErrorPair) -> (f64, f64) {
    (field.omega() * (1.0 + err.delta_omega), delta + err.delta_delta)
}

pub fn propagate_step(
    rho: &DensityMatrix,
    field: &ControlField,
    delta: f64,
    dt: f64,
    err: &ErrorPair,
) -> Result<DensityMatrix> {
    ensure_finite(delta, "detuning")?;
    ensure_finite(dt, "dt")?;
    err.check_finite()?;
    if dt <= 0.0 {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    let (rabi, detuning) = effective_controls(field, delta, err);
    Ok(rho.conjugate_by(&step_unitary(rabi, detuning, dt)))
}

/// Apply every step of `pulse`; the result holds `pulse.len() + 1` states
/// starting with `rho0`.
pub fn evolve_pulse(rho0: &DensityMatrix, pulse: &PulseSequence, err: &ErrorPair) -> Result<Vec<DensityMatrix>> {
    let mut trajectory = Vec::with_capacity(pulse.len() + 1);
    trajectory.push(*rho0);
    let mut rho = *rho0;
    for &delta in pulse.deltas() {
        rho = propagate_step(&rho, pulse.field(), delta, pulse.dt(), err)?;
        trajectory.push(rho);
    }
    Ok(trajectory)
}

/// Final state only, without storing the trajectory.
pub fn evolve_final(rho0: &DensityMatrix, pulse: &PulseSequence, err: &ErrorPair) -> Result<DensityMatrix> {
    err.check_finite()?;
    let mut u = CMat2::identity();
    for &delta in pulse.deltas() {
        let (rabi, detuning) = effective_controls(pulse.field(), delta, err);
        u = step_unitary(rabi, detuning, pulse.dt()) * u;
    }
    Ok(rho0.conjugate_by(&u))
}

/// Population of |1> after running `pulse` from |0>.
pub fn final_population(pulse: &PulseSequence, err: &ErrorPair) -> Result<f64> {
    Ok(evolve_final(&DensityMatrix::ground(), pulse, err)?.population_excited())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn field() -> ControlField {
        ControlField::new(1.0, 2.0).unwrap()
    }

    /// Detuned Rabi oscillation from |0>.
    fn rabi_oracle(omega: f64, delta: f64, t: f64) -> f64 {
        let g = (omega * omega + delta * delta).sqrt();
        omega * omega / (g * g) * (0.5 * g * t).sin().powi(2)
    }

    #[test]
    fn resonant_half_period_flips() {
        let rho = propagate_step(&DensityMatrix::ground(), &field(), 0.0, PI, &ErrorPair::NONE).unwrap();
        assert!((rho.population_excited() - 1.0).abs() < 1e-15);
        assert!((rho.matrix() - DensityMatrix::excited().matrix()).norm() < 1e-15);
    }

    #[test]
    fn maximally_mixed_is_fixed_point() {
        for (delta, dt) in [(0.0, 1.0), (1.3, 0.2), (-5.0, 7.0)] {
            let rho =
                propagate_step(&DensityMatrix::maximally_mixed(), &field(), delta, dt, &ErrorPair::new(0.1, 0.2)).unwrap();
            assert!((rho.matrix() - DensityMatrix::maximally_mixed().matrix()).norm() < 1e-15);
        }
    }

    #[test]
    fn detuned_step_matches_rabi_formula() {
        // delta = Omega, dt = pi / Omega: P = (1/2) sin^2(pi / sqrt 2)
        let rho = propagate_step(&DensityMatrix::ground(), &field(), 1.0, PI, &ErrorPair::NONE).unwrap();
        let expected = 0.5 * (PI / 2f64.sqrt()).sin().powi(2);
        assert!((rho.population_excited() - expected).abs() < 1e-14);
        assert!((expected - rabi_oracle(1.0, 1.0, PI)).abs() < 1e-15);
    }

    #[test]
    fn twenty_step_pi_pulse() {
        let f = ControlField::from_mhz(20.0, 1.5).unwrap();
        let pulse = PulseSequence::flat_pi(f, 20).unwrap();
        let traj = evolve_pulse(&DensityMatrix::ground(), &pulse, &ErrorPair::NONE).unwrap();
        assert_eq!(traj.len(), 21);
        assert_eq!(traj[0], DensityMatrix::ground());
        assert!((traj[20].population_excited() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn non_finite_inputs_rejected() {
        let g = DensityMatrix::ground();
        assert!(propagate_step(&g, &field(), f64::NAN, 1.0, &ErrorPair::NONE).is_err());
        assert!(propagate_step(&g, &field(), 0.0, f64::INFINITY, &ErrorPair::NONE).is_err());
        assert!(propagate_step(&g, &field(), 0.0, 1.0, &ErrorPair::new(f64::NAN, 0.0)).is_err());
        assert!(propagate_step(&g, &field(), 0.0, -1.0, &ErrorPair::NONE).is_err());
    }

    #[test]
    fn final_matches_full_trajectory() {
        let f = field();
        let pulse = PulseSequence::new(0.13, vec![0.3, -1.2, 1.9, 0.0, -0.4], f).unwrap();
        let err = ErrorPair::new(0.05, -0.1);
        let traj = evolve_pulse(&DensityMatrix::ground(), &pulse, &err).unwrap();
        let last = evolve_final(&DensityMatrix::ground(), &pulse, &err).unwrap();
        assert!((traj.last().unwrap().matrix() - last.matrix()).norm() < 1e-14);
    }

    fn arb_state() -> impl Strategy<Value = DensityMatrix> {
        (0.0..PI, 0.0..2.0 * PI, 0.0f64..=1.0).prop_map(|(theta, phi, r)| {
            let (x, y, z) = (r * theta.sin() * phi.cos(), r * theta.sin() * phi.sin(), r * theta.cos());
            let m = CMat2::new(
                Complex64::new(0.5 * (1.0 + z), 0.0),
                Complex64::new(0.5 * x, -0.5 * y),
                Complex64::new(0.5 * x, 0.5 * y),
                Complex64::new(0.5 * (1.0 - z), 0.0),
            );
            DensityMatrix::from_matrix(m).unwrap()
        })
    }

    proptest! {
        #[test]
        fn step_preserves_invariants(rho in arb_state(), delta in -5.0f64..5.0, dt in 1e-3f64..10.0,
                                     dw in -0.3f64..0.3, dd in -1.0f64..1.0) {
            let out = propagate_step(&rho, &field(), delta, dt, &ErrorPair::new(dw, dd)).unwrap();
            prop_assert!(out.check(1e-12).is_ok());
            prop_assert!((out.purity() - rho.purity()).abs() < 1e-12);
        }

        #[test]
        fn two_half_steps_equal_one_step(rho in arb_state(), delta in -5.0f64..5.0, dt in 1e-3f64..5.0) {
            let f = field();
            let half = propagate_step(&rho, &f, delta, dt, &ErrorPair::NONE).unwrap();
            let twice = propagate_step(&half, &f, delta, dt, &ErrorPair::NONE).unwrap();
            let once = propagate_step(&rho, &f, delta, 2.0 * dt, &ErrorPair::NONE).unwrap();
            prop_assert!((twice.matrix() - once.matrix()).norm() < 1e-12);
        }

        #[test]
        fn constant_detuning_matches_rabi_oracle(delta in -4.0f64..4.0, t in 0.0f64..20.0) {
            let f = field();
            let rho = if t == 0.0 { DensityMatrix::ground() } else {
                propagate_step(&DensityMatrix::ground(), &f, delta, t, &ErrorPair::NONE).unwrap()
            };
            prop_assert!((rho.population_excited() - rabi_oracle(1.0, delta, t)).abs() < 1e-10);
        }

        #[test]
        fn error_injection_equals_modified_field(rho in arb_state(), delta in -2.0f64..2.0, dt in 1e-3f64..5.0,
                                                 dw in -0.5f64..0.5, dd in -1.0f64..1.0) {
            let f = field();
            let with_err = propagate_step(&rho, &f, delta, dt, &ErrorPair::new(dw, dd)).unwrap();
            let shifted = ControlField::new(f.omega() * (1.0 + dw), 10.0).unwrap();
            let direct = propagate_step(&rho, &shifted, delta + dd, dt, &ErrorPair::NONE).unwrap();
            prop_assert_eq!(with_err, direct);
        }
    }
}
