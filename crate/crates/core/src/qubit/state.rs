use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMat2 = Matrix2<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Qubit density matrix in the basis |0> = (1, 0), |1> = (0, 1), with
/// sigma_z |0> = +|0>.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(CMat2);

/// Pauli expectation values (<sigma_x>, <sigma_y>, <sigma_z>).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

impl DensityMatrix {
    /// |0><0|
    pub fn ground() -> Self {
        Self(CMat2::new(ONE, ZERO, ZERO, ZERO))
    }

    /// |1><1|
    pub fn excited() -> Self {
        Self(CMat2::new(ZERO, ZERO, ZERO, ONE))
    }

    pub fn maximally_mixed() -> Self {
        Self(CMat2::identity() * Complex64::new(0.5, 0.0))
    }

    /// |psi><psi| for psi = c0|0> + c1|1>; the amplitudes must be normalized.
    pub fn pure(c0: Complex64, c1: Complex64) -> Result<Self> {
        let norm_sq = c0.norm_sqr() + c1.norm_sqr();
        if !norm_sq.is_finite() {
            return Err(Error::NonFinite("state amplitudes"));
        }
        if (norm_sq - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(Self(CMat2::new(
            c0 * c0.conj(),
            c0 * c1.conj(),
            c1 * c0.conj(),
            c1 * c1.conj(),
        )))
    }

    /// Wrap an arbitrary matrix after checking every density-matrix invariant.
    pub fn from_matrix(m: CMat2) -> Result<Self> {
        let rho = Self(m);
        rho.check(1e-12)?;
        Ok(rho)
    }

    pub fn matrix(&self) -> &CMat2 {
        &self.0
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> Complex64 {
        self.0[(0, 0)] + self.0[(1, 1)]
    }

    /// tr(rho^2)
    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// Both eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let a = self.0[(0, 0)].re;
        let d = self.0[(1, 1)].re;
        let b = self.0[(0, 1)];
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d).powi(2) + b.norm_sqr()).sqrt();
        [mean - radius, mean + radius]
    }

    /// Hermiticity, unit trace, positivity and the purity range, each at `tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        if self.0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("density matrix entries"));
        }
        for i in 0..2 {
            for j in 0..2 {
                if (self.0[(i, j)] - self.0[(j, i)].conj()).norm() > tol {
                    return Err(Error::InvalidState(format!("not Hermitian at ({i}, {j})")));
                }
            }
        }
        let tr = self.trace();
        if (tr - ONE).norm() > tol {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let [low, _] = self.eigenvalues();
        if low < -tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {low}")));
        }
        let p = self.purity();
        if !(0.5 - tol..=1.0 + tol).contains(&p) {
            return Err(Error::InvalidState(format!("purity {p} outside [1/2, 1]")));
        }
        Ok(())
    }

    /// <1|rho|1>, clamped to [0, 1].
    pub fn population_excited(&self) -> f64 {
        self.0[(1, 1)].re.clamp(0.0, 1.0)
    }

    pub fn bloch_vector(&self) -> BlochVector {
        let off = self.0[(1, 0)];
        BlochVector {
            x: 2.0 * off.re,
            y: 2.0 * off.im,
            z: (self.0[(0, 0)] - self.0[(1, 1)]).re,
        }
    }

    /// U rho U^dagger
    pub fn conjugate_by(&self, u: &CMat2) -> Self {
        Self(u * self.0 * u.adjoint())
    }
}

/// Population of |1>.
pub fn population_excited(rho: &DensityMatrix) -> f64 {
    rho.population_excited()
}

pub fn bloch_vector(rho: &DensityMatrix) -> BlochVector {
    rho.bloch_vector()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn populations_of_basis_and_superposition() {
        assert_eq!(DensityMatrix::ground().population_excited(), 0.0);
        assert_eq!(DensityMatrix::excited().population_excited(), 1.0);
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let plus = DensityMatrix::pure(h, h).unwrap();
        assert!((plus.population_excited() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bloch_vectors_of_reference_states() {
        let g = DensityMatrix::ground().bloch_vector();
        assert_eq!((g.x, g.y, g.z), (0.0, 0.0, 1.0));
        let e = DensityMatrix::excited().bloch_vector();
        assert_eq!((e.x, e.y, e.z), (0.0, 0.0, -1.0));
        let m = DensityMatrix::maximally_mixed().bloch_vector();
        assert_eq!((m.x, m.y, m.z), (0.0, 0.0, 0.0));
    }

    #[test]
    fn plus_y_state_points_along_y() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let rho = DensityMatrix::pure(Complex64::new(h, 0.0), Complex64::new(0.0, h)).unwrap();
        let b = rho.bloch_vector();
        assert!(b.x.abs() < 1e-15 && (b.y - 1.0).abs() < 1e-15 && b.z.abs() < 1e-15);
    }

    #[test]
    fn unnormalized_pure_state_is_rejected() {
        let err = DensityMatrix::pure(ONE, ONE).unwrap_err();
        assert!(matches!(err, Error::NotNormalized { .. }));
    }

    #[test]
    fn invalid_matrices_are_rejected() {
        let not_hermitian = CMat2::new(ONE, ONE, ZERO, ZERO);
        assert!(DensityMatrix::from_matrix(not_hermitian).is_err());
        let negative = CMat2::new(Complex64::new(1.5, 0.0), ZERO, ZERO, Complex64::new(-0.5, 0.0));
        assert!(DensityMatrix::from_matrix(negative).is_err());
        let wrong_trace = CMat2::new(ONE, ZERO, ZERO, ONE);
        assert!(DensityMatrix::from_matrix(wrong_trace).is_err());
        assert!(DensityMatrix::from_matrix(*DensityMatrix::maximally_mixed().matrix()).is_ok());
    }
}
