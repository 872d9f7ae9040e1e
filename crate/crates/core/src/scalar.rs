//! Scalar abstraction for the numerical core.
//!
//! Everything in this crate is generic over [`Real`], which is `num_traits::Float`
//! plus the handful of extras the algorithms need: a complementary error function
//! (evaluated through `libm` so tail accuracy is preserved) and draws from the
//! standard normal and open-unit-uniform distributions. `f64` is the working
//! precision for all shipped diagnostics; `f32` is supported for completeness.

use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};

/// Floating-point scalar usable by the sampler, integrator, and diagnostics.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + core::fmt::Debug
    + core::fmt::Display
    + core::iter::Sum
    + Send
    + Sync
    + 'static
{
    /// Complementary error function with full relative accuracy in the tail.
    fn erfc(self) -> Self;

    /// One standard normal draw.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One uniform draw from the open interval (0, 1).
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Lossy conversion from `f64`, for constants.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant converts to any Real")
    }

    /// Lossy conversion to `f64`, for reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Lossy conversion from a mode index.
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("mode index converts to any Real")
    }
}

impl Real for f64 {
    fn erfc(self) -> Self {
        libm::erfc(self)
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Open01.sample(rng)
    }
}

impl Real for f32 {
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Open01.sample(rng)
    }
}
