use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{ensure_finite, Error, Result};

/// Convert a frequency in MHz (cycles) to an angular frequency in rad/s.
pub fn mhz_to_rad_per_s(mhz: f64) -> f64 {
    2.0 * PI * mhz * 1e6
}

/// Fixed transverse drive and the detuning bound, both in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlField {
    omega: f64,
    delta_max: f64,
}

impl ControlField {
    pub fn new(omega: f64, delta_max: f64) -> Result<Self> {
        ensure_finite(omega, "omega")?;
        ensure_finite(delta_max, "delta_max")?;
        if omega <= 0.0 {
            return Err(Error::InvalidParameter(format!("omega must be > 0, got {omega}")));
        }
        if delta_max < 0.0 {
            return Err(Error::InvalidParameter(format!("delta_max must be >= 0, got {delta_max}")));
        }
        Ok(Self { omega, delta_max })
    }

    /// Field with the Rabi frequency given in MHz and the bound in units of Omega.
    pub fn from_mhz(omega_mhz: f64, delta_max_over_omega: f64) -> Result<Self> {
        let omega = mhz_to_rad_per_s(omega_mhz);
        Self::new(omega, delta_max_over_omega * omega)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn delta_max(&self) -> f64 {
        self.delta_max
    }

    pub fn with_delta_max(self, delta_max: f64) -> Result<Self> {
        Self::new(self.omega, delta_max)
    }
}

/// Systematic errors: Omega -> Omega (1 + delta_omega), Delta -> Delta + delta_delta.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorPair {
    /// Relative Rabi-frequency error (dimensionless).
    pub delta_omega: f64,
    /// Absolute detuning offset, rad/s.
    pub delta_delta: f64,
}

impl ErrorPair {
    pub const NONE: ErrorPair = ErrorPair { delta_omega: 0.0, delta_delta: 0.0 };

    pub fn new(delta_omega: f64, delta_delta: f64) -> Self {
        Self { delta_omega, delta_delta }
    }

    /// Errors expressed the way the robustness plots are: delta_delta relative
    /// to the field's detuning bound, delta_omega already relative.
    pub fn relative(field: &ControlField, delta_rel: f64, omega_rel: f64) -> Self {
        Self { delta_omega: omega_rel, delta_delta: delta_rel * field.delta_max() }
    }

    pub fn check_finite(&self) -> Result<()> {
        ensure_finite(self.delta_omega, "delta_omega")?;
        ensure_finite(self.delta_delta, "delta_delta")?;
        Ok(())
    }
}

/// Piecewise-constant detuning waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    dt: f64,
    deltas: Vec<f64>,
    field: ControlField,
}

impl PulseSequence {
    pub fn new(dt: f64, deltas: Vec<f64>, field: ControlField) -> Result<Self> {
        ensure_finite(dt, "dt")?;
        if dt <= 0.0 {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        if deltas.is_empty() {
            return Err(Error::InvalidParameter("pulse must have at least one step".into()));
        }
        for (index, &value) in deltas.iter().enumerate() {
            ensure_finite(value, "detuning")?;
            if value.abs() > field.delta_max() {
                return Err(Error::DetuningOutOfRange { index, value, bound: field.delta_max() });
            }
        }
        Ok(Self { dt, deltas, field })
    }

    /// Constant detuning over `n_steps` steps spanning `duration`.
    pub fn constant(field: ControlField, delta: f64, duration: f64, n_steps: usize) -> Result<Self> {
        Self::new(duration / n_steps as f64, vec![delta; n_steps], field)
    }

    /// Resonant flat pi pulse: zero detuning for T = pi / Omega.
    pub fn flat_pi(field: ControlField, n_steps: usize) -> Result<Self> {
        Self::constant(field, 0.0, PI / field.omega(), n_steps)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn field(&self) -> &ControlField {
        &self.field
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.deltas.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_validation() {
        assert!(ControlField::new(0.0, 1.0).is_err());
        assert!(ControlField::new(1.0, -1.0).is_err());
        assert!(ControlField::new(f64::NAN, 1.0).is_err());
        let f = ControlField::from_mhz(20.0, 1.5).unwrap();
        assert!((f.omega() - 2.0 * PI * 20e6).abs() < 1e-6);
        assert!((f.delta_max() - 1.5 * f.omega()).abs() < 1e-6);
    }

    #[test]
    fn pulse_rejects_out_of_range_detuning() {
        let f = ControlField::new(1.0, 0.5).unwrap();
        let err = PulseSequence::new(0.1, vec![0.0, 0.6], f).unwrap_err();
        assert!(matches!(err, Error::DetuningOutOfRange { index: 1, .. }));
        assert!(PulseSequence::new(0.1, vec![], f).is_err());
        assert!(PulseSequence::new(0.0, vec![0.0], f).is_err());
        assert!(PulseSequence::new(0.1, vec![-0.5, 0.5], f).is_ok());
    }
}
