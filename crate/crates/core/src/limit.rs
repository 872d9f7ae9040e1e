//! The limiting diffusion: acceptance/speed scaling constants, the
//! tilted-Gaussian closed forms behind them, Euler–Maruyama integration in
//! spectral coordinates, and exact Ornstein–Uhlenbeck transitions for
//! conjugate targets.

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::potential::PotentialSpec;
use crate::scalar::Real;
use crate::spectral::{CovarianceSpec, SpectralVector};

/// Standard normal CDF through the complementary error function, preserving
/// relative accuracy in both tails.
pub fn normal_cdf<F: Real>(x: F) -> F {
    F::of(0.5) * Real::erfc(-x / F::of(core::f64::consts::SQRT_2))
}

/// Standard normal density.
pub fn normal_pdf<F: Real>(x: F) -> F {
    (-x * x * F::of(0.5)).exp() / F::of((2.0 * core::f64::consts::PI).sqrt())
}

/// `log(Phi(x))`, finite far into the left tail.
fn ln_normal_cdf<F: Real>(x: F) -> F {
    if x > F::of(-8.0) {
        normal_cdf(x).ln()
    } else {
        // Asymptotic expansion: Phi(x) ~ phi(x)/(-x) (1 - 1/x^2 + 3/x^4)
        let x2 = x * x;
        -x2 * F::of(0.5) - (-x).ln() - F::of(0.5 * (2.0 * core::f64::consts::PI).ln())
            + (F::one() - F::one() / x2 + F::of(3.0) / (x2 * x2)).ln()
    }
}

/// `exp(v) * Phi(x)` evaluated without overflow.
fn exp_times_normal_cdf<F: Real>(v: F, x: F) -> F {
    if v < F::of(700.0) {
        v.exp() * normal_cdf(x)
    } else {
        (v + ln_normal_cdf(x)).exp()
    }
}

/// Limiting average acceptance probability `beta(ell) = 2 Phi(-ell / sqrt 2)`,
/// computed as `erfc(ell / 2)`. `beta(0) = 1`.
pub fn beta_of_ell<F: Real>(ell: F) -> F {
    Real::erfc(ell * F::of(0.5))
}

/// `Phi(-ell/sqrt 2)`: the common value of the positive-tail probability and
/// the negative-part exponential moment of the limiting acceptance exponent.
/// Equals `beta_of_ell(ell) / 2` exactly.
pub fn z_ell_half_moment<F: Real>(ell: F) -> F {
    beta_of_ell(ell) * F::of(0.5)
}

/// The `(ell, beta, h)` triple that tunes both the proposal and the time
/// scale of the limiting diffusion: `beta = 2 Phi(-ell/sqrt 2)`,
/// `h = ell^2 * beta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingConstants<F> {
    ell: F,
    beta: F,
    h: F,
}

impl<F: Real> ScalingConstants<F> {
    pub fn from_ell(ell: F) -> Result<Self> {
        if !ell.is_finite() || ell < F::zero() {
            return Err(CoreError::InvalidParameter(format!(
                "ell must be a nonnegative finite real, got {ell}"
            )));
        }
        let beta = beta_of_ell(ell);
        Ok(Self {
            ell,
            beta,
            h: ell * ell * beta,
        })
    }

    pub fn ell(&self) -> F {
        self.ell
    }

    pub fn beta(&self) -> F {
        self.beta
    }

    /// Speed `h = ell^2 beta` of the limiting diffusion.
    pub fn h(&self) -> F {
        self.h
    }
}

/// Argmax of the diffusion speed over `ell`.
#[derive(Clone, Copy, Debug)]
pub struct OptimalScaling<F> {
    pub ell: F,
    pub beta: F,
    pub h: F,
}

/// Maximizes `h(ell) = ell^2 * beta(ell)` over `[lo, hi]` by golden-section
/// search to the given tolerance on `ell`.
///
/// Errors when the maximum sits on (or within `10 * tol` of) the boundary,
/// which means the bracket contains no interior maximum.
pub fn optimal_ell<F: Real>(lo: F, hi: F, tol: F) -> Result<OptimalScaling<F>> {
    if !(lo.is_finite() && hi.is_finite()) || lo < F::zero() || hi <= lo {
        return Err(CoreError::InvalidParameter(format!(
            "need 0 <= lo < hi, got [{lo}, {hi}]"
        )));
    }
    if !tol.is_finite() || tol <= F::zero() {
        return Err(CoreError::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let h = |ell: F| ell * ell * beta_of_ell(ell);
    let inv_phi = F::of((5.0_f64.sqrt() - 1.0) / 2.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (h(c), h(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = h(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = h(d);
        }
    }
    let ell = (a + b) * F::of(0.5);
    let margin = tol * F::of(10.0);
    if ell - lo <= margin || hi - ell <= margin {
        return Err(CoreError::NoInteriorMaximum {
            lo: lo.as_f64(),
            hi: hi.as_f64(),
        });
    }
    Ok(OptimalScaling {
        ell,
        beta: beta_of_ell(ell),
        h: h(ell),
    })
}

/// `E[z (1 and e^{a z + b})]` for standard normal `z`:
/// `a exp(a^2/2 + b) Phi(-b/|a| - |a|)`, and `0` when `a = 0`.
pub fn gaussian_tilt_moment<F: Real>(a: F, b: F) -> F {
    if a == F::zero() {
        return F::zero();
    }
    let abs_a = a.abs();
    a * exp_times_normal_cdf(a * a * F::of(0.5) + b, -b / abs_a - abs_a)
}

/// Moments of `1 and exp(a z + b - c z^2)` against a standard normal `z`,
/// for `c > 0`.
#[derive(Clone, Copy, Debug)]
pub struct TiltedMoments<F> {
    /// `E[1 and e^g]`
    pub m0: F,
    /// `E[z (1 and e^g)]`
    pub m1: F,
    /// `E[z^2 (1 and e^g)]`
    pub m2: F,
}

/// Closed-form moments of `min(1, exp(a z + b - c z^2))` under `z ~ N(0,1)`.
///
/// The exponent is a downward parabola; where its discriminant
/// `a^2 + 4 b c` is positive the clip region is the interval between the two
/// roots, and each piece reduces to Gaussian integrals. Used by the
/// conditional (Rao-Blackwellized) one-step estimators, where the acceptance
/// exponent is exactly quadratic in one noise coordinate.
pub fn tilted_moments<F: Real>(a: F, b: F, c: F) -> TiltedMoments<F> {
    assert!(c > F::zero(), "tilted_moments needs c > 0");
    let one = F::one();
    let two = F::of(2.0);

    let kappa2 = two * c + one; // precision of the tilted Gaussian
    let sk = kappa2.sqrt();
    let mu = a / kappa2;
    let v = b + a * a / (two * kappa2); // log prefactor before 1/sk

    // Tilted partial moments over [p, q] in standardized coordinates
    // t = sk (z - mu); returns the integrals of z^k e^{a z + b - c z^2} phi(z)
    // for k = 0, 1, 2, each carrying the prefactor e^v through the
    // overflow-safe evaluators.
    let tilted_piece = |t_p: F, t_q: F| -> (F, F, F) {
        let cdf = exp_times_normal_cdf(v, t_q) - exp_times_normal_cdf(v, t_p);
        let pdf_p = if t_p.is_infinite() {
            F::zero()
        } else {
            exp_pdf(v, t_p)
        };
        let pdf_q = if t_q.is_infinite() {
            F::zero()
        } else {
            exp_pdf(v, t_q)
        };
        let dphi = pdf_p - pdf_q;
        let tp_pdf = if t_p.is_infinite() { F::zero() } else { t_p * pdf_p };
        let tq_pdf = if t_q.is_infinite() { F::zero() } else { t_q * pdf_q };
        let dt2 = cdf + tp_pdf - tq_pdf;
        let i0 = cdf / sk;
        let i1 = mu * i0 + dphi / kappa2;
        let i2 = mu * mu * i0 + two * mu * dphi / kappa2 + dt2 / (kappa2 * sk);
        (i0, i1, i2)
    };

    let disc = a * a + F::of(4.0) * b * c;
    if disc <= F::zero() {
        // exponent <= 0 everywhere: pure tilted integral over the line
        let (i0, i1, i2) = tilted_piece(F::neg_infinity(), F::infinity());
        return TiltedMoments {
            m0: i0,
            m1: i1,
            m2: i2,
        };
    }
    let sq = disc.sqrt();
    let z_lo = (a - sq) / (two * c);
    let z_hi = (a + sq) / (two * c);
    // plain-normal partial moments over the clip interval [z_lo, z_hi]
    let cdf_lo = normal_cdf(z_lo);
    let cdf_hi = normal_cdf(z_hi);
    let pdf_lo = normal_pdf(z_lo);
    let pdf_hi = normal_pdf(z_hi);
    let p0 = cdf_hi - cdf_lo;
    let p1 = pdf_lo - pdf_hi;
    let p2 = p0 + z_lo * pdf_lo - z_hi * pdf_hi;

    let t_lo = |z: F| sk * (z - mu);
    let (l0, l1, l2) = tilted_piece(F::neg_infinity(), t_lo(z_lo));
    let (r0, r1, r2) = tilted_piece(t_lo(z_hi), F::infinity());
    TiltedMoments {
        m0: p0 + l0 + r0,
        m1: p1 + l1 + r1,
        m2: p2 + l2 + r2,
    }
}

/// `exp(v) * phi(t)` without overflow.
fn exp_pdf<F: Real>(v: F, t: F) -> F {
    (v - t * t * F::of(0.5)).exp() / F::of((2.0 * core::f64::consts::PI).sqrt())
}

/// One Euler–Maruyama step of the limiting diffusion at truncation `n`:
/// active modes follow
/// `z' = z - h (z + C grad_psi^n(z)) dt + sqrt(2 h dt) lambda_j xi_j`,
/// stored tail modes evolve by their exact reference OU transition over `dt`.
///
/// Consumes one normal per stored mode.
pub fn euler_step<F: Real, R: Rng + ?Sized>(
    z: &SpectralVector<F>,
    potential: &PotentialSpec<F>,
    covariance: &CovarianceSpec<F>,
    sc: &ScalingConstants<F>,
    dt: F,
    n: usize,
    rng: &mut R,
) -> Result<SpectralVector<F>> {
    if !dt.is_finite() || dt <= F::zero() {
        return Err(CoreError::InvalidParameter(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let h = sc.h();
    let grad = potential.grad_psi(z, n);
    let noise = (F::of(2.0) * h * dt).sqrt();
    let mut coords = Vec::with_capacity(z.n_store());
    for j in 1..=z.n_store() {
        let lam = covariance.eigenvalue(j)?;
        let xi = F::standard_normal(rng);
        let c = z.coord(j);
        if j <= n {
            let drift = c + lam * lam * grad.coord(j);
            coords.push(c - h * drift * dt + noise * lam * xi);
        } else {
            // exact reference OU over dt keeps untracked modes unbiased
            let decay = (-h * dt).exp();
            let sd = lam * (F::one() - decay * decay).sqrt();
            coords.push(c * decay + sd * xi);
        }
    }
    Ok(SpectralVector::from_raw(coords))
}

/// Integrates the truncated diffusion from `z0` to time `t_end` with uniform
/// steps of length `dt` (final step shortened to land exactly on `t_end`).
pub fn euler_integrate<F: Real, R: Rng + ?Sized>(
    z0: SpectralVector<F>,
    potential: &PotentialSpec<F>,
    covariance: &CovarianceSpec<F>,
    sc: &ScalingConstants<F>,
    t_end: F,
    dt: F,
    n: usize,
    rng: &mut R,
) -> Result<SpectralVector<F>> {
    if !t_end.is_finite() || t_end < F::zero() {
        return Err(CoreError::InvalidParameter(format!(
            "t_end must be nonnegative, got {t_end}"
        )));
    }
    let mut z = z0;
    let mut t = F::zero();
    while t < t_end {
        let step = dt.min(t_end - t);
        if step <= F::zero() {
            break;
        }
        z = euler_step(&z, potential, covariance, sc, step, n, rng)?;
        t += step;
    }
    Ok(z)
}

/// Stability-guided default step: `min(1e-3, 0.05 / h)`.
pub fn default_dt<F: Real>(sc: &ScalingConstants<F>) -> F {
    let cap = F::of(1e-3);
    if sc.h() <= F::zero() {
        cap
    } else {
        cap.min(F::of(0.05) / sc.h())
    }
}

/// Samples the exact transition of the per-mode conjugate OU dynamics
/// `dz = -h (1 + lambda^2 a) z dt + sqrt(2h) lambda dW` over time `t`:
/// `z(t) = z0 e^{-theta t} + N(0, sigma^2 (1 - e^{-2 theta t}))` with
/// `theta = h (1 + lambda^2 a)` and `sigma^2 = lambda^2 / (1 + lambda^2 a)`.
///
/// Consumes exactly one normal.
pub fn exact_ou_transition<F: Real, R: Rng + ?Sized>(
    z0: F,
    lambda: F,
    quad_coeff: F,
    sc: &ScalingConstants<F>,
    t: F,
    rng: &mut R,
) -> F {
    let stiffness = F::one() + lambda * lambda * quad_coeff;
    let theta = sc.h() * stiffness;
    let sigma_sq = lambda * lambda / stiffness;
    let decay = (-theta * t).exp();
    let sd = (sigma_sq * (F::one() - decay * decay)).sqrt();
    z0 * decay + sd * F::standard_normal(rng)
}

/// Draws the limiting diffusion at time `t`, started from its stationary law
/// at truncation `n` and advanced by exact per-mode OU transitions.
///
/// Available only for the conjugate (quadratic) potential family; consumes
/// two normals per stored mode.
pub fn sample_stationary_diffusion<F: Real, R: Rng + ?Sized>(
    potential: &PotentialSpec<F>,
    covariance: &CovarianceSpec<F>,
    sc: &ScalingConstants<F>,
    t: F,
    n: usize,
    n_store: usize,
    rng: &mut R,
) -> Result<SpectralVector<F>> {
    if n_store == 0 {
        return Err(CoreError::EmptyVector);
    }
    let mut coords = Vec::with_capacity(n_store);
    for j in 1..=n_store {
        let lam = covariance.eigenvalue(j)?;
        let a = if j <= n {
            potential.quad_coeff(j).ok_or(CoreError::UnsupportedPotential(
                "stationary diffusion sampling needs a quadratic-family potential",
            ))?
        } else {
            F::zero()
        };
        let var0 = potential.exact_mode_variance(covariance, j, n)?;
        let z0 = var0.sqrt() * F::standard_normal(rng);
        coords.push(exact_ou_transition(z0, lam, a, sc, t, rng));
    }
    Ok(SpectralVector::from_raw(coords))
}
