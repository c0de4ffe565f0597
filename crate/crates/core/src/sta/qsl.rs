//! Quantum speed limits for the series route and for unconstrained control.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::profile::SeriesCoefficients;
use crate::error::{Error, Result};
use crate::numerics::optimize::{nelder_mead, scan_then_brent};
use crate::numerics::quadrature::integrate;

pub const MAX_QSL_ORDER: usize = 10;

/// Omega T = int_0^pi sqrt(1 + 4 M^2 sin^2 theta) d(theta); never below pi.
pub fn qsl_time(alphas: &SeriesCoefficients) -> f64 {
    integrate(|th| alphas.w(th), 0.0, PI, 1e-10, 1e-13).value
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QslOptimum {
    pub coefficients: SeriesCoefficients,
    pub omega_t: f64,
    pub converged: bool,
}

fn qsl_of(alphas: &[f64]) -> f64 {
    match SeriesCoefficients::new(alphas.to_vec()) {
        Ok(c) => qsl_time(&c),
        Err(_) => f64::INFINITY,
    }
}

/// Coefficients of the given order minimizing the series QSL. Order 1 is a
/// scanned 1-D search; higher orders warm-start from the previous order.
pub fn minimize_qsl(order: usize) -> Result<QslOptimum> {
    if !(1..=MAX_QSL_ORDER).contains(&order) {
        return Err(Error::InvalidParameter(format!("QSL order must be in 1..={MAX_QSL_ORDER}, got {order}")));
    }
    let first = scan_then_brent(&|a: f64| qsl_of(&[a]), -3.0, 3.0, 200, 1e-10);
    let mut best = QslOptimum {
        coefficients: SeriesCoefficients::new(vec![first.x])?,
        omega_t: first.value,
        converged: first.converged,
    };
    for n in 2..=order {
        let mut x0 = best.coefficients.alphas().to_vec();
        x0.push(0.0);
        let m = nelder_mead(&|x: &[f64]| qsl_of(x), &x0, 0.1, 4000, 3);
        best = QslOptimum { coefficients: SeriesCoefficients::new(m.x)?, omega_t: m.value, converged: m.converged };
        debug_assert_eq!(best.coefficients.order(), n);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BangOffBang {
    /// Minimal Omega T.
    pub omega_t: f64,
    /// arccos(|f0 i0| + |f1 i1|), the rotation half-angle before doubling.
    pub arccos: f64,
}

fn check_normalized(c0: Complex64, c1: Complex64) -> Result<()> {
    let norm_sq = c0.norm_sqr() + c1.norm_sqr();
    if !norm_sq.is_finite() {
        return Err(Error::NonFinite("state amplitudes"));
    }
    if (norm_sq - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { norm_sq });
    }
    Ok(())
}

/// Minimal time between two pure states when the detuning is unbounded:
/// free phase kicks around a single sigma_x rotation of angle
/// 2 arccos(|f0 i0| + |f1 i1|).
pub fn bang_off_bang_qsl(initial: (Complex64, Complex64), target: (Complex64, Complex64)) -> Result<BangOffBang> {
    check_normalized(initial.0, initial.1)?;
    check_normalized(target.0, target.1)?;
    let overlap = (target.0.norm() * initial.0.norm() + target.1.norm() * initial.1.norm()).min(1.0);
    let arccos = overlap.acos();
    Ok(BangOffBang { omega_t: 2.0 * arccos, arccos })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::{final_population, ControlField, ErrorPair, PulseSequence};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn qsl_of_flat_phase() {
        let q = qsl_time(&SeriesCoefficients::empty());
        assert!((q - 5.27037).abs() < 1e-5);
        assert_eq!(q, qsl_time(&SeriesCoefficients::new(vec![0.0]).unwrap()));
    }

    #[test]
    fn qsl_order_one_optimum() {
        let q = qsl_time(&SeriesCoefficients::new(vec![1.06]).unwrap());
        assert!((q - 4.33).abs() < 0.02);
        let m = minimize_qsl(1).unwrap();
        assert!((m.coefficients.alphas()[0] - 1.06).abs() < 0.02);
        assert!((m.omega_t - 4.33).abs() < 0.02);
    }

    #[test]
    fn qsl_order_two() {
        let m = minimize_qsl(2).unwrap();
        assert!((m.omega_t - 3.96).abs() < 0.03, "{}", m.omega_t);
    }

    #[test]
    fn order_out_of_range() {
        assert!(minimize_qsl(0).is_err());
        assert!(minimize_qsl(11).is_err());
    }

    #[test]
    fn bang_off_bang_cases() {
        let flip = bang_off_bang_qsl((c(1.0, 0.0), c(0.0, 0.0)), (c(0.0, 0.0), c(1.0, 0.0))).unwrap();
        assert!((flip.omega_t - PI).abs() < 1e-15);
        let same = bang_off_bang_qsl((c(1.0, 0.0), c(0.0, 0.0)), (c(1.0, 0.0), c(0.0, 0.0))).unwrap();
        assert_eq!(same.omega_t, 0.0);
        assert!(bang_off_bang_qsl((c(1.0, 0.0), c(1.0, 0.0)), (c(1.0, 0.0), c(0.0, 0.0))).is_err());
    }

    #[test]
    fn bang_off_bang_half_flip_by_simulation() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let q = bang_off_bang_qsl((c(1.0, 0.0), c(0.0, 0.0)), (c(0.5, 0.5), c(h, 0.0))).unwrap();
        assert!((q.omega_t - PI / 2.0).abs() < 1e-12);
        let field = ControlField::new(1.0, 1.0).unwrap();
        let pulse = PulseSequence::constant(field, 0.0, q.omega_t, 1).unwrap();
        let p = final_population(&pulse, &ErrorPair::NONE).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn qsl_never_below_pi(alphas in prop::collection::vec(-3.0f64..3.0, 0..6)) {
            let q = qsl_time(&SeriesCoefficients::new(alphas).unwrap());
            prop_assert!(q >= PI - 1e-12);
        }
    }
}
