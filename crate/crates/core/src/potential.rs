//! The log-density perturbation defining the target measure relative to the
//! Gaussian reference, together with gradients and the exact per-mode
//! stationary variances available in the conjugate (quadratic) family.

use crate::error::{CoreError, Result};
use crate::spectral::{CovarianceSpec, SobolevIndex, SpectralVector};
use crate::scalar::Real;

/// Built-in perturbation functionals.
///
/// Every variant is bounded below by zero, quadratically bounded above, has a
/// linearly bounded gradient, and a bounded second derivative; finite
/// coefficient lists make the bound constants finite by construction.
#[derive(Clone, Debug, PartialEq)]
pub enum PotentialSpec<F> {
    /// The reference measure itself.
    Zero,
    /// `psi(x) = 1/2 sum_j a_j x_j^2`, coefficients zero beyond the stored list.
    DiagonalQuadratic { coeffs: Vec<F> },
    /// `psi(x) = weight * ||x||_s^2`.
    SobolevSquared { weight: F, index: SobolevIndex<F> },
    /// `psi(x) = sum_j w_j (1 - cos x_j)`, weights zero beyond the stored list.
    CosineTilt { weights: Vec<F> },
}

impl<F: Real> PotentialSpec<F> {
    pub fn zero() -> Self {
        Self::Zero
    }

    pub fn diagonal_quadratic(coeffs: Vec<F>) -> Result<Self> {
        if coeffs.iter().any(|a| !a.is_finite() || *a < F::zero()) {
            return Err(CoreError::InvalidPotential(
                "quadratic coefficients must be nonnegative finite reals".into(),
            ));
        }
        Ok(Self::DiagonalQuadratic { coeffs })
    }

    pub fn sobolev_squared(weight: F, index: SobolevIndex<F>) -> Result<Self> {
        if !weight.is_finite() || weight <= F::zero() {
            return Err(CoreError::InvalidPotential(format!(
                "Sobolev-squared weight must be positive, got {weight}"
            )));
        }
        Ok(Self::SobolevSquared { weight, index })
    }

    pub fn cosine_tilt(weights: Vec<F>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < F::zero()) {
            return Err(CoreError::InvalidPotential(
                "cosine tilt weights must be nonnegative finite reals".into(),
            ));
        }
        Ok(Self::CosineTilt { weights })
    }

    /// `psi(P^n x)`.
    pub fn psi(&self, x: &SpectralVector<F>, n: usize) -> F {
        let active = n.min(x.n_store());
        match self {
            Self::Zero => F::zero(),
            Self::DiagonalQuadratic { coeffs } => {
                let half = F::of(0.5);
                let mut acc = F::zero();
                for (i, &c) in x.coords()[..active].iter().enumerate() {
                    if let Some(&a) = coeffs.get(i) {
                        acc += a * c * c;
                    }
                }
                half * acc
            }
            Self::SobolevSquared { weight, index } => {
                let mut acc = F::zero();
                for (i, &c) in x.coords()[..active].iter().enumerate() {
                    acc += index.weight(i + 1) * c * c;
                }
                *weight * acc
            }
            Self::CosineTilt { weights } => {
                let mut acc = F::zero();
                for (i, &c) in x.coords()[..active].iter().enumerate() {
                    if let Some(&w) = weights.get(i) {
                        acc += w * (F::one() - c.cos());
                    }
                }
                acc
            }
        }
    }

    /// Gradient of the truncated functional; coordinates beyond `n` are zero.
    /// The result is stored on the same number of modes as `x`.
    pub fn grad_psi(&self, x: &SpectralVector<F>, n: usize) -> SpectralVector<F> {
        let active = n.min(x.n_store());
        let mut coords = vec![F::zero(); x.n_store()];
        match self {
            Self::Zero => {}
            Self::DiagonalQuadratic { coeffs } => {
                for (i, g) in coords[..active].iter_mut().enumerate() {
                    if let Some(&a) = coeffs.get(i) {
                        *g = a * x.coord(i + 1);
                    }
                }
            }
            Self::SobolevSquared { weight, index } => {
                let two = F::of(2.0);
                for (i, g) in coords[..active].iter_mut().enumerate() {
                    *g = two * *weight * index.weight(i + 1) * x.coord(i + 1);
                }
            }
            Self::CosineTilt { weights } => {
                for (i, g) in coords[..active].iter_mut().enumerate() {
                    if let Some(&w) = weights.get(i) {
                        *g = w * x.coord(i + 1).sin();
                    }
                }
            }
        }
        SpectralVector::from_raw(coords)
    }

    /// Per-mode curvature `a_j` when the functional is exactly diagonal
    /// quadratic in the eigenbasis, `None` otherwise.
    ///
    /// `Zero` and `DiagonalQuadratic` are quadratic by definition;
    /// `SobolevSquared` is diagonal quadratic with `a_j = 2 * weight * j^{2s}`.
    pub fn quad_coeff(&self, j: usize) -> Option<F> {
        match self {
            Self::Zero => Some(F::zero()),
            Self::DiagonalQuadratic { coeffs } => {
                Some(coeffs.get(j - 1).copied().unwrap_or_else(F::zero))
            }
            Self::SobolevSquared { weight, index } => {
                Some(F::of(2.0) * *weight * index.weight(j))
            }
            Self::CosineTilt { .. } => None,
        }
    }

    /// Whether the target admits exact per-mode stationary sampling.
    pub fn is_conjugate(&self) -> bool {
        !matches!(self, Self::CosineTilt { .. })
    }

    /// Greatest lower bound of the functional (zero for every built-in).
    pub fn lower_bound(&self) -> F {
        F::zero()
    }

    /// Variance of coordinate `j` under the truncated target: modes beyond `n`
    /// keep the reference variance `lambda_j^2`; active quadratic modes tighten
    /// to `(lambda_j^{-2} + a_j)^{-1}`.
    pub fn exact_mode_variance(
        &self,
        spec: &CovarianceSpec<F>,
        j: usize,
        n: usize,
    ) -> Result<F> {
        let lambda = spec.eigenvalue(j)?;
        if j > n {
            return Ok(lambda * lambda);
        }
        match self.quad_coeff(j) {
            Some(a) => Ok(F::one() / (F::one() / (lambda * lambda) + a)),
            None => Err(CoreError::UnsupportedPotential(
                "cosine tilt has no closed-form stationary marginals; \
                 fall back to burn-in initialization",
            )),
        }
    }
}
