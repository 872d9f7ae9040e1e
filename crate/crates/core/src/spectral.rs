//! Spectral coordinates, the covariance operator, Sobolev norms, and sampling
//! from the Gaussian reference measure.
//!
//! Elements of the Hilbert space are stored as their coordinates in the
//! covariance eigenbasis. Mode indices are 1-based everywhere in the public
//! API; coordinates beyond the stored length are implicitly zero.

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::scalar::Real;

/// Coordinates of a Hilbert-space element in the covariance eigenbasis,
/// truncated to the stored number of modes.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralVector<F> {
    coords: Vec<F>,
}

impl<F: Real> SpectralVector<F> {
    /// Wraps a coordinate vector. Rejects empty and non-finite input.
    pub fn new(coords: Vec<F>) -> Result<Self> {
        if coords.is_empty() {
            return Err(CoreError::EmptyVector);
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(CoreError::NonFinite {
                context: "spectral vector coordinates",
            });
        }
        Ok(Self { coords })
    }

    /// The zero element stored on `n` modes.
    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(CoreError::EmptyVector);
        }
        Ok(Self {
            coords: vec![F::zero(); n],
        })
    }

    /// Builds coordinates from a 1-based mode index map.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize) -> F) -> Result<Self> {
        Self::new((1..=n).map(|j| f(j)).collect())
    }

    /// Number of stored modes.
    pub fn n_store(&self) -> usize {
        self.coords.len()
    }

    /// Coordinate of mode `j` (1-based); zero beyond the stored range.
    #[inline]
    pub fn coord(&self, j: usize) -> F {
        debug_assert!(j >= 1, "mode indices are 1-based");
        self.coords.get(j - 1).copied().unwrap_or_else(F::zero)
    }

    /// Stored coordinates as a slice (index 0 holds mode 1).
    #[inline]
    pub fn coords(&self) -> &[F] {
        &self.coords
    }

    pub(crate) fn from_raw(coords: Vec<F>) -> Self {
        debug_assert!(!coords.is_empty());
        Self { coords }
    }

    /// Plain Hilbert-space norm of the stored coordinates.
    pub fn norm(&self) -> F {
        self.coords
            .iter()
            .map(|&c| c * c)
            .fold(F::zero(), |acc, v| acc + v)
            .sqrt()
    }
}

/// The diagonal covariance operator, given through its eigenvalue law.
///
/// `eigenvalue(j)` returns the standard deviation `lambda_j`; the operator
/// itself acts as multiplication by `lambda_j^2`.
#[derive(Clone, Debug, PartialEq)]
pub enum CovarianceSpec<F> {
    /// `lambda_j = amplitude * j^{-kappa}` with `kappa > 1/2`.
    PowerLaw { amplitude: F, kappa: F },
    /// Explicit positive nonincreasing list of `lambda_j`.
    Explicit { lambdas: Vec<F> },
}

impl<F: Real> CovarianceSpec<F> {
    pub fn power_law(amplitude: F, kappa: F) -> Result<Self> {
        if !amplitude.is_finite() || amplitude <= F::zero() {
            return Err(CoreError::InvalidCovariance(format!(
                "amplitude must be a positive finite real, got {amplitude}"
            )));
        }
        if !kappa.is_finite() || kappa <= F::of(0.5) {
            return Err(CoreError::InvalidCovariance(format!(
                "kappa must exceed 1/2 for a trace-class covariance, got {kappa}"
            )));
        }
        Ok(Self::PowerLaw { amplitude, kappa })
    }

    /// Power law with unit amplitude.
    pub fn power_law_unit(kappa: F) -> Result<Self> {
        Self::power_law(F::one(), kappa)
    }

    pub fn explicit(lambdas: Vec<F>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(CoreError::InvalidCovariance(
                "explicit eigenvalue list is empty".into(),
            ));
        }
        if lambdas.iter().any(|l| !l.is_finite() || *l <= F::zero()) {
            return Err(CoreError::InvalidCovariance(
                "eigenvalues must be positive finite reals".into(),
            ));
        }
        if lambdas.windows(2).any(|w| w[1] > w[0]) {
            return Err(CoreError::InvalidCovariance(
                "eigenvalues must be nonincreasing".into(),
            ));
        }
        Ok(Self::Explicit { lambdas })
    }

    /// `lambda_j`, the standard deviation of mode `j` under the reference
    /// measure (1-based).
    pub fn eigenvalue(&self, j: usize) -> Result<F> {
        if j == 0 {
            return Err(CoreError::InvalidParameter(
                "mode indices are 1-based".into(),
            ));
        }
        match self {
            Self::PowerLaw { amplitude, kappa } => {
                Ok(*amplitude * F::of_usize(j).powf(-*kappa))
            }
            Self::Explicit { lambdas } => lambdas.get(j - 1).copied().ok_or(
                CoreError::ModeIndexOutOfRange {
                    index: j,
                    len: lambdas.len(),
                },
            ),
        }
    }

    /// First `n` standard deviations, as a table for hot loops.
    pub fn stddevs(&self, n: usize) -> Result<Vec<F>> {
        (1..=n).map(|j| self.eigenvalue(j)).collect()
    }

    /// Largest representable mode, if the law is finitely supported.
    pub fn max_mode(&self) -> Option<usize> {
        match self {
            Self::PowerLaw { .. } => None,
            Self::Explicit { lambdas } => Some(lambdas.len()),
        }
    }

    /// Checks that `s` is an admissible working Sobolev exponent: `s >= 0`,
    /// and `s < kappa - 1/2` when the decay rate is known.
    pub fn validate_working_index(&self, s: SobolevIndex<F>) -> Result<()> {
        if s.r() < F::zero() {
            return Err(CoreError::InvalidParameter(format!(
                "working Sobolev exponent must be nonnegative, got {}",
                s.r()
            )));
        }
        if let Self::PowerLaw { kappa, .. } = self {
            if s.r() >= *kappa - F::of(0.5) {
                return Err(CoreError::InvalidParameter(format!(
                    "s = {} >= kappa - 1/2 = {} violates the trace-class condition \
                     for the reference measure on the working Sobolev space",
                    s.r(),
                    *kappa - F::of(0.5)
                )));
            }
        }
        Ok(())
    }
}

/// A Sobolev exponent `r`; the weighted norm is
/// `||x||_r^2 = sum_j j^{2r} x_j^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolevIndex<F> {
    r: F,
}

impl<F: Real> SobolevIndex<F> {
    pub fn new(r: F) -> Result<Self> {
        if !r.is_finite() {
            return Err(CoreError::NonFinite {
                context: "Sobolev exponent",
            });
        }
        Ok(Self { r })
    }

    /// The plain Hilbert-space norm, `r = 0`.
    pub fn zero() -> Self {
        Self { r: F::zero() }
    }

    pub fn r(&self) -> F {
        self.r
    }

    /// `j^{2r}`, the diagonal norm weight of mode `j`.
    #[inline]
    pub fn weight(&self, j: usize) -> F {
        if self.r == F::zero() {
            F::one()
        } else {
            F::of_usize(j).powf(self.r + self.r)
        }
    }

    /// Weights for modes `1..=n` as a table.
    pub fn weights(&self, n: usize) -> Vec<F> {
        (1..=n).map(|j| self.weight(j)).collect()
    }
}

/// `||x||_r = (sum_{j <= n_store} j^{2r} x_j^2)^{1/2}`.
pub fn sobolev_norm<F: Real>(x: &SpectralVector<F>, r: SobolevIndex<F>) -> F {
    x.coords()
        .iter()
        .enumerate()
        .map(|(i, &c)| r.weight(i + 1) * c * c)
        .fold(F::zero(), |acc, v| acc + v)
        .sqrt()
}

/// Applies `C^a` coordinate-wise: mode `j` is scaled by `lambda_j^{2a}`.
///
/// Negative powers are well defined because only finitely many modes are
/// stored and every stored eigenvalue is strictly positive.
pub fn apply_c_power<F: Real>(
    x: &SpectralVector<F>,
    a: F,
    spec: &CovarianceSpec<F>,
) -> Result<SpectralVector<F>> {
    let two_a = a + a;
    let coords = x
        .coords()
        .iter()
        .enumerate()
        .map(|(i, &c)| Ok(spec.eigenvalue(i + 1)?.powf(two_a) * c))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralVector::from_raw(coords))
}

/// Projection onto the first `n` modes: coordinates beyond `n` are zeroed.
pub fn project<F: Real>(x: &SpectralVector<F>, n: usize) -> SpectralVector<F> {
    let coords = x
        .coords()
        .iter()
        .enumerate()
        .map(|(i, &c)| if i < n { c } else { F::zero() })
        .collect();
    SpectralVector::from_raw(coords)
}

/// Mode range for trace computations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceDomain {
    /// Sum over modes `1..=n`.
    Truncated(usize),
    /// The full series.
    Full,
}

/// A trace value together with the half-width of its enclosure.
#[derive(Clone, Copy, Debug)]
pub struct TraceEstimate<F> {
    pub value: F,
    pub tail_error: F,
}

// Cutoff for the summed head of the full power-law series. The remaining tail
// is enclosed by the integral bounds below; at kappa = 1, r = 0 the enclosure
// half-width is ~5e-13.
const FULL_TRACE_CUTOFF: usize = 1_000_000;

/// `trace(C_r) = sum_j lambda_j^2 j^{2r}` over the requested mode range.
///
/// For the full power-law series the head is summed directly and the tail is
/// enclosed between `int_{n0+1}^inf` and `int_{n0}^inf` of
/// `amplitude^2 t^{2r-2kappa} dt`; the midpoint is reported and the half-width
/// returned as `tail_error`. An explicit law has finitely many modes, so its
/// full trace is the exact sum of all of them.
pub fn trace_cr<F: Real>(
    spec: &CovarianceSpec<F>,
    r: SobolevIndex<F>,
    domain: TraceDomain,
) -> Result<TraceEstimate<F>> {
    let partial = |n: usize| -> Result<F> {
        let mut acc = F::zero();
        for j in 1..=n {
            let l = spec.eigenvalue(j)?;
            acc += l * l * r.weight(j);
        }
        Ok(acc)
    };
    match (domain, spec) {
        (TraceDomain::Truncated(n), _) => {
            if n == 0 {
                return Err(CoreError::InvalidParameter(
                    "trace needs at least one mode".into(),
                ));
            }
            Ok(TraceEstimate {
                value: partial(n)?,
                tail_error: F::zero(),
            })
        }
        (TraceDomain::Full, CovarianceSpec::Explicit { lambdas }) => Ok(TraceEstimate {
            value: partial(lambdas.len())?,
            tail_error: F::zero(),
        }),
        (TraceDomain::Full, CovarianceSpec::PowerLaw { amplitude, kappa }) => {
            // Exponent of the summand: 2r - 2kappa; converges iff < -1.
            let p = r.r() + r.r() - (*kappa + *kappa);
            if p >= -F::one() {
                return Err(CoreError::TraceDiverges {
                    kappa: kappa.as_f64(),
                    r: r.r().as_f64(),
                });
            }
            let head = partial(FULL_TRACE_CUTOFF)?;
            let amp2 = *amplitude * *amplitude;
            // int_n^inf t^p dt = n^{p+1} / (-(p+1))
            let tail_at = |n: F| amp2 * n.powf(p + F::one()) / (-(p + F::one()));
            let hi = tail_at(F::of_usize(FULL_TRACE_CUTOFF));
            let lo = tail_at(F::of_usize(FULL_TRACE_CUTOFF + 1));
            let half = F::of(0.5);
            Ok(TraceEstimate {
                value: head + half * (hi + lo),
                tail_error: half * (hi - lo),
            })
        }
    }
}

/// One draw from the Gaussian reference measure on the first `n` modes:
/// `x_j = lambda_j rho_j` with `rho_j` i.i.d. standard normal.
///
/// Consumes exactly `n` normals, in mode order.
pub fn kl_sample<F: Real, R: Rng + ?Sized>(
    rng: &mut R,
    spec: &CovarianceSpec<F>,
    n: usize,
) -> Result<SpectralVector<F>> {
    if n == 0 {
        return Err(CoreError::EmptyVector);
    }
    let mut coords = Vec::with_capacity(n);
    for j in 1..=n {
        let l = spec.eigenvalue(j)?;
        coords.push(l * F::standard_normal(rng));
    }
    Ok(SpectralVector::from_raw(coords))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_power_law() -> CovarianceSpec<f64> {
        CovarianceSpec::power_law(1.0, 1.0).unwrap()
    }

    #[test]
    fn eigenvalue_power_law_and_explicit() {
        let spec = unit_power_law();
        assert_eq!(spec.eigenvalue(2).unwrap(), 0.5);
        assert_eq!(spec.eigenvalue(1).unwrap(), 1.0);
        let ex = CovarianceSpec::explicit(vec![0.9, 0.3]).unwrap();
        assert_eq!(ex.eigenvalue(2).unwrap(), 0.3);
        assert!(matches!(
            ex.eigenvalue(3),
            Err(CoreError::ModeIndexOutOfRange { index: 3, len: 2 })
        ));
    }

    #[test]
    fn covariance_validation() {
        assert!(CovarianceSpec::power_law(1.0, 0.5).is_err());
        assert!(CovarianceSpec::power_law(0.0, 1.0).is_err());
        assert!(CovarianceSpec::explicit(vec![0.3, 0.9]).is_err());
        assert!(CovarianceSpec::explicit(vec![1.0, -0.1]).is_err());
        assert!(CovarianceSpec::<f64>::explicit(vec![]).is_err());
    }

    #[test]
    fn sobolev_norm_cases() {
        let x = SpectralVector::new(vec![1.0, 1.0]).unwrap();
        let r1 = SobolevIndex::new(1.0).unwrap();
        assert!((sobolev_norm(&x, r1) - 5.0_f64.sqrt()).abs() < 1e-15);

        let y = SpectralVector::new(vec![3.0, 0.0, 4.0]).unwrap();
        assert_eq!(sobolev_norm(&y, SobolevIndex::zero()), 5.0);

        // ten ones at r = 1/2: sum of j = 55
        let z = SpectralVector::new(vec![1.0; 10]).unwrap();
        let rh = SobolevIndex::new(0.5).unwrap();
        assert!((sobolev_norm(&z, rh) - 55.0_f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn sobolev_zero_is_euclidean_exactly() {
        let x = SpectralVector::new(vec![0.3, -1.7, 2.9, 0.0]).unwrap();
        assert_eq!(sobolev_norm(&x, SobolevIndex::zero()), x.norm());
    }

    #[test]
    fn apply_c_power_cases() {
        let spec = unit_power_law();
        let x = SpectralVector::new(vec![1.0, 1.0]).unwrap();
        let id = apply_c_power(&x, 0.0, &spec).unwrap();
        assert_eq!(id, x);

        let half = apply_c_power(&x, 0.5, &spec).unwrap();
        assert!((half.coord(1) - 1.0).abs() < 1e-15);
        assert!((half.coord(2) - 0.5).abs() < 1e-15);

        let x2 = SpectralVector::new(vec![0.7, -2.3, 0.11]).unwrap();
        let roundtrip =
            apply_c_power(&apply_c_power(&x2, -0.5, &spec).unwrap(), 0.5, &spec).unwrap();
        for j in 1..=3 {
            let rel = ((roundtrip.coord(j) - x2.coord(j)) / x2.coord(j)).abs();
            assert!(rel <= 1e-12, "mode {j}: rel err {rel}");
        }
    }

    #[test]
    fn apply_c_power_norm_equivalence_bounds() {
        // ||C^a x|| and ||x||_{-2 kappa a} agree within [M-^2a, M+^2a];
        // for a pure power law the two sides are equal mode by mode.
        let spec = CovarianceSpec::power_law(1.0, 1.3).unwrap();
        let a = 0.35;
        let x = SpectralVector::new(vec![0.4_f64, 1.9, -0.2, 0.05]).unwrap();
        let lhs = apply_c_power(&x, a, &spec).unwrap().norm();
        let r = SobolevIndex::new(-2.0 * 1.3 * a).unwrap();
        let rhs = sobolev_norm(&x, r);
        assert!((lhs - rhs).abs() / rhs < 1e-13);
    }

    #[test]
    fn project_cases() {
        let x = SpectralVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        let p = project(&x, 2);
        assert_eq!(p.coords(), &[1.0, 2.0, 0.0]);
        let full = project(&x, 7);
        assert_eq!(full, x);
    }

    #[test]
    fn projection_tail_inequality_on_random_vectors() {
        // ||x - P^N x||_s <= N^{-(r-s)} ||x||_r for r > s.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let s = SobolevIndex::new(0.25).unwrap();
        let r = SobolevIndex::new(1.0).unwrap();
        for _ in 0..50 {
            let x =
                SpectralVector::from_fn(48, |_| f64::standard_normal(&mut rng)).unwrap();
            for n in [1usize, 4, 16, 32] {
                let diff_coords: Vec<f64> = x
                    .coords()
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| if i < n { 0.0 } else { c })
                    .collect();
                let diff = SpectralVector::new(diff_coords).unwrap();
                let lhs = sobolev_norm(&diff, s);
                let bound = (n as f64).powf(-(r.r() - s.r())) * sobolev_norm(&x, r);
                assert!(lhs <= bound * (1.0 + 1e-12), "n={n}: {lhs} > {bound}");
            }
        }
    }

    #[test]
    fn trace_full_power_law_matches_zeta_two() {
        let spec = unit_power_law();
        let t = trace_cr(&spec, SobolevIndex::zero(), TraceDomain::Full).unwrap();
        let pi2_6 = core::f64::consts::PI * core::f64::consts::PI / 6.0;
        assert!((t.value - pi2_6).abs() < 1e-6, "{} vs {}", t.value, pi2_6);
        assert!((t.value - pi2_6).abs() <= t.tail_error + 1e-9);
    }

    #[test]
    fn trace_single_mode_and_monotonicity() {
        let spec = CovarianceSpec::explicit(vec![0.8_f64, 0.5, 0.25]).unwrap();
        let one = trace_cr(&spec, SobolevIndex::zero(), TraceDomain::Truncated(1)).unwrap();
        assert!((one.value - 0.64).abs() < 1e-15);

        let spec = unit_power_law();
        let mut prev = 0.0;
        for n in [1usize, 2, 8, 64, 512] {
            let t = trace_cr(&spec, SobolevIndex::zero(), TraceDomain::Truncated(n))
                .unwrap()
                .value;
            assert!(t >= prev);
            prev = t;
        }
        let r_small = trace_cr(&spec, SobolevIndex::new(0.1).unwrap(), TraceDomain::Truncated(64))
            .unwrap()
            .value;
        let r_large = trace_cr(&spec, SobolevIndex::new(0.3).unwrap(), TraceDomain::Truncated(64))
            .unwrap()
            .value;
        assert!(r_large >= r_small);
    }

    #[test]
    fn trace_full_agrees_with_brute_force_partial_sum() {
        // 1e7-term direct sum as the independent oracle at r = 0.4.
        let spec = unit_power_law();
        let r = SobolevIndex::new(0.4).unwrap();
        let t = trace_cr(&spec, r, TraceDomain::Full).unwrap();
        let mut brute = 0.0_f64;
        for j in 1..=10_000_000u64 {
            brute += (j as f64).powf(0.8 - 2.0);
        }
        // The brute sum still misses its own tail: int_{1e7}^inf t^{-1.2} dt ~ 0.2 * 1e-7^...
        let brute_tail = (1e7_f64).powf(-0.2) / 0.2;
        assert!(
            (t.value - (brute + brute_tail)).abs() <= t.tail_error + 1e-4,
            "value {} vs brute {}",
            t.value,
            brute + brute_tail
        );
    }

    #[test]
    fn trace_divergence_detected() {
        let spec = unit_power_law();
        let r = SobolevIndex::new(0.5).unwrap(); // 2k - 2r = 1: diverges
        assert!(matches!(
            trace_cr(&spec, r, TraceDomain::Full),
            Err(CoreError::TraceDiverges { .. })
        ));
    }

    #[test]
    fn kl_sample_deterministic_and_correct_law() {
        let spec = unit_power_law();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a: SpectralVector<f64> = kl_sample(&mut rng, &spec, 16).unwrap();
        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        let b: SpectralVector<f64> = kl_sample(&mut rng2, &spec, 16).unwrap();
        assert_eq!(a, b, "same seed must give bit-identical draws");

        // Mode variance matches lambda_j^2 within 4 standard errors over 1e5 draws.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n_draws = 100_000;
        let mut sums = [0.0_f64; 3];
        let mut sq = [0.0_f64; 3];
        for _ in 0..n_draws {
            let x: SpectralVector<f64> = kl_sample(&mut rng, &spec, 3).unwrap();
            for (j, (s, q)) in sums.iter_mut().zip(sq.iter_mut()).enumerate() {
                let c = x.coord(j + 1);
                *s += c;
                *q += c * c;
            }
        }
        for j in 1..=3 {
            let lam2 = spec.eigenvalue(j).unwrap().powi(2);
            let mean = sums[j - 1] / n_draws as f64;
            let var = sq[j - 1] / n_draws as f64 - mean * mean;
            // SE of a chi-square variance estimate: lam^2 sqrt(2/n)
            let se = lam2 * (2.0 / n_draws as f64).sqrt();
            assert!((var - lam2).abs() < 4.0 * se, "mode {j}: var {var} vs {lam2}");
            let mean_se = (lam2 / n_draws as f64).sqrt();
            assert!(mean.abs() < 4.0 * mean_se);
        }
    }

    #[test]
    fn kl_sample_whitened_norm_is_chi_square_mean() {
        let spec = unit_power_law();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 64;
        let reps = 10_000;
        let mut acc = 0.0;
        for _ in 0..reps {
            let x: SpectralVector<f64> = kl_sample(&mut rng, &spec, n).unwrap();
            let w = apply_c_power(&x, -0.5, &spec).unwrap();
            acc += w.norm().powi(2) / n as f64;
        }
        let mean = acc / reps as f64;
        assert!((mean - 1.0).abs() < 0.02, "chi2 mean {mean}");
    }

    #[test]
    fn vector_validation() {
        assert!(SpectralVector::<f64>::new(vec![]).is_err());
        assert!(SpectralVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(SpectralVector::new(vec![f64::INFINITY]).is_err());
        assert!(SpectralVector::<f64>::zeros(0).is_err());
    }
}
