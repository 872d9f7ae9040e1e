//! Numerical verification of the diffusion-limit predictions: one-step
//! drift/diffusion estimators, the concentration statistic, Gaussianity of
//! the acceptance exponent, empirical KS/Wasserstein distances with the
//! density-bound inequality, accumulated-noise Gaussianity, and two-sample
//! endpoint comparisons between the chain interpolant and the exact
//! diffusion.

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::kernel::{zeta, ChainState, Recorder, RwmSampler, StepRecord};
use crate::limit::{
    beta_of_ell, normal_cdf, sample_stationary_diffusion, tilted_moments, ScalingConstants,
};
use crate::potential::PotentialSpec;
use crate::scalar::Real;
use crate::spectral::{CovarianceSpec, SobolevIndex, SpectralVector};
use crate::stream::{derive_rng, StreamRole};

/// Default probe modes for diffusion entries: fast and slow modes without
/// quadratic cost.
pub const DEFAULT_PROBE_MODES: [usize; 5] = [1, 2, 3, 5, 10];
/// Default off-diagonal probes.
pub const DEFAULT_PROBE_PAIRS: [(usize, usize); 2] = [(1, 2), (1, 5)];

/// Which one-step estimator to run.
///
/// `PairSampling` draws `(xi, u)` pairs and averages the realized move; its
/// per-mode noise grows like `sqrt(n / n_inner)`, which swamps the vanishing
/// residual at large `n`. `Conditional` draws only `xi` and replaces the
/// indicator by its exact expectation over one coordinate (closed-form
/// tilted-Gaussian moments), cutting the variance by roughly `n`; it needs a
/// quadratic-family potential.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DriftEstimator {
    PairSampling,
    Conditional,
}

/// One-step drift estimate against the limiting drift at a fixed probe point.
#[derive(Clone, Debug)]
pub struct DriftReport<F> {
    pub n: usize,
    pub n_inner: u64,
    pub estimator: DriftEstimator,
    /// `n * E[x^1 - x]` per active mode.
    pub drift_est: Vec<F>,
    /// `-ell^2 beta (P^n x + C^n grad_psi^n(x))` per active mode.
    pub drift_theory: Vec<F>,
    /// Monte Carlo standard error per active mode.
    pub standard_errors: Vec<F>,
    /// `||drift_est - drift_theory||_s`.
    pub residual_norm_s: F,
    /// Residual with the known sampling variance removed:
    /// `sqrt(max(0, ||resid||_s^2 - sum_j j^{2s} se_j^2))`.
    pub residual_norm_s_debiased: F,
    pub theory_norm_s: F,
}

impl<F: Real> DriftReport<F> {
    /// Debiased residual relative to the theory norm.
    pub fn relative_residual(&self) -> F {
        self.residual_norm_s_debiased / self.theory_norm_s
    }
}

/// Estimates `n * E[x^1 - x]` at the probe point `x` and compares with the
/// limiting drift. Consumes `n_inner * (n normals + 1 uniform)` draws in the
/// pair-sampling mode and `n_inner * n` normals in the conditional mode.
pub fn estimate_one_step_drift<F: Real, R: Rng + ?Sized>(
    x: &SpectralVector<F>,
    sampler: &RwmSampler<F>,
    n_inner: u64,
    estimator: DriftEstimator,
    rng: &mut R,
) -> Result<DriftReport<F>> {
    if n_inner == 0 {
        return Err(CoreError::TooFewSamples { need: 1, got: 0 });
    }
    let n = sampler.params().active_modes();
    let ell = sampler.params().ell();
    let beta = beta_of_ell(ell);
    let scale = sampler.params().step_scale();
    let n_f = F::of_usize(n);
    let big_n = F::of_usize(n);

    let mut sums = vec![F::zero(); n];
    let mut sumsqs = vec![F::zero(); n];

    match estimator {
        DriftEstimator::PairSampling => {
            let state = ChainState::new(x.clone());
            for _ in 0..n_inner {
                let (next, _record) = sampler.step(&state, rng);
                for i in 0..n {
                    let d = next.x.coord(i + 1) - x.coord(i + 1);
                    sums[i] += d;
                    sumsqs[i] += d * d;
                }
            }
        }
        DriftEstimator::Conditional => {
            // Exact per-coordinate expectation of the accepted move, averaged
            // over the remaining coordinates. Exponent coefficients per mode:
            // alpha_j = -scale * zeta_j, c_j = (ell^2/n)(1 + a_j lambda_j^2).
            let zeta_vec = zeta(x, sampler.potential(), sampler.covariance(), n)?;
            let ell2_over_n = ell * ell / n_f;
            let mut alpha = vec![F::zero(); n];
            let mut curv = vec![F::zero(); n];
            for j in 1..=n {
                let lam = sampler.lambda(j);
                let a = sampler.potential().quad_coeff(j).ok_or(
                    CoreError::UnsupportedPotential(
                        "conditional drift estimator needs a quadratic-family potential",
                    ),
                )?;
                alpha[j - 1] = -scale * zeta_vec.coord(j);
                curv[j - 1] = ell2_over_n * (F::one() + a * lam * lam);
            }
            let mut xi = vec![F::zero(); n];
            for _ in 0..n_inner {
                let mut q = F::zero();
                for i in 0..n {
                    let z = F::standard_normal(rng);
                    xi[i] = z;
                    q += alpha[i] * z - curv[i] * z * z;
                }
                for i in 0..n {
                    let b = q - alpha[i] * xi[i] + curv[i] * xi[i] * xi[i];
                    let m1 = tilted_moments(alpha[i], b, curv[i]).m1;
                    let v = scale * sampler.lambda(i + 1) * m1;
                    sums[i] += v;
                    sumsqs[i] += v * v;
                }
            }
        }
    }

    let m_f = F::of(n_inner as f64);
    let drift_field = sampler.drift_field(x);
    let mut drift_est = Vec::with_capacity(n);
    let mut drift_theory = Vec::with_capacity(n);
    let mut standard_errors = Vec::with_capacity(n);
    let mut resid_sq = F::zero();
    let mut noise_sq = F::zero();
    let mut theory_sq = F::zero();
    for i in 0..n {
        let mean = sums[i] / m_f;
        let var = (sumsqs[i] / m_f - mean * mean).max(F::zero());
        let est = big_n * mean;
        let se = big_n * (var / m_f).sqrt();
        let theory = -ell * ell * beta * drift_field.coord(i + 1);
        let w = sampler.sobolev_weight(i + 1);
        let r = est - theory;
        resid_sq += w * r * r;
        noise_sq += w * se * se;
        theory_sq += w * theory * theory;
        drift_est.push(est);
        drift_theory.push(theory);
        standard_errors.push(se);
    }
    Ok(DriftReport {
        n,
        n_inner,
        estimator,
        drift_est,
        drift_theory,
        standard_errors,
        residual_norm_s: resid_sq.sqrt(),
        residual_norm_s_debiased: (resid_sq - noise_sq).max(F::zero()).sqrt(),
        theory_norm_s: theory_sq.sqrt(),
    })
}

/// One probe entry of the one-step second-moment matrix.
#[derive(Clone, Copy, Debug)]
pub struct DiffusionProbe<F> {
    pub i: usize,
    pub j: usize,
    /// `n * E[(x^1 - x)_i (x^1 - x)_j]`
    pub estimate: F,
    /// `2 ell^2 beta lambda_i^2` on the diagonal, zero off it.
    pub theory: F,
    pub standard_error: F,
}

#[derive(Clone, Debug)]
pub struct DiffusionReport<F> {
    pub n: usize,
    pub n_inner: u64,
    pub diagonal: Vec<DiffusionProbe<F>>,
    pub off_diagonal: Vec<DiffusionProbe<F>>,
}

/// Estimates probe entries of `n * E[(x^1-x) (x^1-x)^T]` at the probe point
/// by pair sampling.
pub fn estimate_one_step_diffusion<F: Real, R: Rng + ?Sized>(
    x: &SpectralVector<F>,
    sampler: &RwmSampler<F>,
    n_inner: u64,
    probe_modes: &[usize],
    probe_pairs: &[(usize, usize)],
    rng: &mut R,
) -> Result<DiffusionReport<F>> {
    if n_inner == 0 {
        return Err(CoreError::TooFewSamples { need: 1, got: 0 });
    }
    let n = sampler.params().active_modes();
    for &m in probe_modes.iter().chain(probe_pairs.iter().flat_map(|p| [&p.0, &p.1])) {
        if m == 0 || m > n {
            return Err(CoreError::InvalidParameter(format!(
                "probe mode {m} outside the active range 1..={n}"
            )));
        }
    }
    let ell = sampler.params().ell();
    let beta = beta_of_ell(ell);
    let n_f = F::of_usize(n);

    let state = ChainState::new(x.clone());
    let mut diag_sums = vec![F::zero(); probe_modes.len()];
    let mut diag_sumsqs = vec![F::zero(); probe_modes.len()];
    let mut off_sums = vec![F::zero(); probe_pairs.len()];
    let mut off_sumsqs = vec![F::zero(); probe_pairs.len()];
    for _ in 0..n_inner {
        let (next, _) = sampler.step(&state, rng);
        for (k, &i) in probe_modes.iter().enumerate() {
            let d = next.x.coord(i) - x.coord(i);
            let v = d * d;
            diag_sums[k] += v;
            diag_sumsqs[k] += v * v;
        }
        for (k, &(i, j)) in probe_pairs.iter().enumerate() {
            let v = (next.x.coord(i) - x.coord(i)) * (next.x.coord(j) - x.coord(j));
            off_sums[k] += v;
            off_sumsqs[k] += v * v;
        }
    }

    let m_f = F::of(n_inner as f64);
    let entry = |i: usize, j: usize, sum: F, sumsq: F| {
        let mean = sum / m_f;
        let var = (sumsq / m_f - mean * mean).max(F::zero());
        let theory = if i == j {
            let lam = sampler.lambda(i);
            F::of(2.0) * ell * ell * beta * lam * lam
        } else {
            F::zero()
        };
        DiffusionProbe {
            i,
            j,
            estimate: n_f * mean,
            theory,
            standard_error: n_f * (var / m_f).sqrt(),
        }
    };
    Ok(DiffusionReport {
        n,
        n_inner,
        diagonal: probe_modes
            .iter()
            .enumerate()
            .map(|(k, &i)| entry(i, i, diag_sums[k], diag_sumsqs[k]))
            .collect(),
        off_diagonal: probe_pairs
            .iter()
            .enumerate()
            .map(|(k, &(i, j))| entry(i, j, off_sums[k], off_sumsqs[k]))
            .collect(),
    })
}

/// `||zeta(x)||^2 / n`, which concentrates at one in stationarity.
pub fn zeta_statistic<F: Real>(
    x: &SpectralVector<F>,
    potential: &PotentialSpec<F>,
    covariance: &CovarianceSpec<F>,
    n: usize,
) -> Result<F> {
    let z = zeta(x, potential, covariance, n)?;
    Ok(z.norm().powi(2) / F::of_usize(n))
}

/// Moments and one-sample KS of collected acceptance exponents against their
/// Gaussian limit `N(-ell^2, 2 ell^2)`.
#[derive(Clone, Debug)]
pub struct QMomentReport<F> {
    pub n_samples: usize,
    pub mean: F,
    pub variance: F,
    pub mean_theory: F,
    pub variance_theory: F,
    pub ks_to_limit: F,
}

pub fn q_moment_test<F: Real>(q_samples: &[F], ell: F) -> Result<QMomentReport<F>> {
    if q_samples.len() < 100 {
        return Err(CoreError::TooFewSamples {
            need: 100,
            got: q_samples.len(),
        });
    }
    let n = F::of_usize(q_samples.len());
    let mean = q_samples.iter().copied().sum::<F>() / n;
    let variance = q_samples
        .iter()
        .map(|&q| (q - mean) * (q - mean))
        .sum::<F>()
        / (n - F::one());
    let ell2 = ell * ell;
    let sd = (F::of(2.0) * ell2).sqrt();
    let ks = empirical_ks_vs_cdf(q_samples, |t| normal_cdf((t + ell2) / sd))?;
    Ok(QMomentReport {
        n_samples: q_samples.len(),
        mean,
        variance,
        mean_theory: -ell2,
        variance_theory: F::of(2.0) * ell2,
        ks_to_limit: ks,
    })
}

fn sorted<F: Real>(v: &[F]) -> Vec<F> {
    let mut out = v.to_vec();
    out.sort_by(|a, b| a.partial_cmp(b).expect("samples must not contain NaN"));
    out
}

/// Two-sample Kolmogorov–Smirnov distance: the exact sup of the empirical
/// CDF difference over the merged sample grid.
pub fn empirical_ks_two_sample<F: Real>(a: &[F], b: &[F]) -> Result<F> {
    if a.len() < 2 || b.len() < 2 {
        return Err(CoreError::TooFewSamples {
            need: 2,
            got: a.len().min(b.len()),
        });
    }
    let xa = sorted(a);
    let xb = sorted(b);
    let (na, nb) = (F::of_usize(xa.len()), F::of_usize(xb.len()));
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut d = F::zero();
    while ia < xa.len() || ib < xb.len() {
        let v = match (xa.get(ia), xb.get(ib)) {
            (Some(&va), Some(&vb)) => va.min(vb),
            (Some(&va), None) => va,
            (None, Some(&vb)) => vb,
            (None, None) => break,
        };
        while ia < xa.len() && xa[ia] <= v {
            ia += 1;
        }
        while ib < xb.len() && xb[ib] <= v {
            ib += 1;
        }
        let diff = (F::of_usize(ia) / na - F::of_usize(ib) / nb).abs();
        d = d.max(diff);
    }
    Ok(d)
}

/// One-sample Kolmogorov–Smirnov distance against a callable CDF.
pub fn empirical_ks_vs_cdf<F: Real>(samples: &[F], cdf: impl Fn(F) -> F) -> Result<F> {
    if samples.is_empty() {
        return Err(CoreError::EmptySample);
    }
    let xs = sorted(samples);
    let n = F::of_usize(xs.len());
    let mut d = F::zero();
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let hi = F::of_usize(i + 1) / n - f;
        let lo = f - F::of_usize(i) / n;
        d = d.max(hi.max(lo));
    }
    Ok(d)
}

/// One-dimensional Wasserstein-1 distance through the order-statistics
/// coupling. Equal sample counts pair sorted values directly; unequal counts
/// are aligned by evaluating both empirical quantile functions on the
/// `min(n_a, n_b)` midpoint grid (a documented trim).
pub fn empirical_wasserstein1<F: Real>(a: &[F], b: &[F]) -> Result<F> {
    if a.is_empty() || b.is_empty() {
        return Err(CoreError::EmptySample);
    }
    let xa = sorted(a);
    let xb = sorted(b);
    let k = xa.len().min(xb.len());
    let k_f = F::of_usize(k);
    let half = F::of(0.5);
    let pick = |xs: &[F], i: usize| -> F {
        let q = (F::of_usize(i) + half) / k_f;
        let idx = (q * F::of_usize(xs.len())).floor().as_f64() as usize;
        xs[idx.min(xs.len() - 1)]
    };
    let mut acc = F::zero();
    for i in 0..k {
        acc += (pick(&xa, i) - pick(&xb, i)).abs();
    }
    Ok(acc / k_f)
}

/// Empirical check of `KS <= sqrt(4 M Wass) + slack` between a sample and a
/// reference sample whose density is bounded by `density_bound`.
#[derive(Clone, Copy, Debug)]
pub struct DistanceReport<F> {
    pub ks: F,
    pub wasserstein1: F,
    pub n_a: usize,
    pub n_b: usize,
    pub density_bound: F,
    pub slack: F,
    pub bound_ok: bool,
}

/// Default slack absorbing two-sample fluctuations: `2 * 1.63 / sqrt(min n)`
/// (twice the 99% one-sided Kolmogorov band).
pub fn default_ks_wass_slack<F: Real>(n_a: usize, n_b: usize) -> F {
    F::of(2.0 * 1.63) / F::of_usize(n_a.min(n_b)).sqrt()
}

pub fn ks_wass_bound_check<F: Real>(
    samples: &[F],
    reference: &[F],
    density_bound: F,
) -> Result<DistanceReport<F>> {
    let slack = default_ks_wass_slack(samples.len(), reference.len());
    ks_wass_bound_check_with_slack(samples, reference, density_bound, slack)
}

pub fn ks_wass_bound_check_with_slack<F: Real>(
    samples: &[F],
    reference: &[F],
    density_bound: F,
    slack: F,
) -> Result<DistanceReport<F>> {
    let ks = empirical_ks_two_sample(samples, reference)?;
    let w1 = empirical_wasserstein1(samples, reference)?;
    let bound = (F::of(4.0) * density_bound * w1).sqrt() + slack;
    Ok(DistanceReport {
        ks,
        wasserstein1: w1,
        n_a: samples.len(),
        n_b: reference.len(),
        density_bound,
        slack,
        bound_ok: ks <= bound,
    })
}

/// Streaming accumulator of the rescaled noise process
/// `W(t) = sqrt(dt) sum Gamma^l + (nt - floor(nt))/sqrt(n) Gamma^{floor+1}`
/// along one chain trajectory, tracked on a set of probe modes.
///
/// The exact conditional mean in `Gamma` is replaced by its limiting value
/// `-(ell^2 beta / n) m(x^k)`; the substitution bias is the same residual the
/// one-step drift diagnostic controls.
pub struct NoiseAccumulator<'a, F> {
    sampler: &'a RwmSampler<F>,
    probe_modes: Vec<usize>,
    w: Vec<F>,
    prev: Option<SpectralVector<F>>,
    steps_seen: u64,
    full_steps: u64,
    frac: F,
    scale: F,
    centering: F,
}

impl<'a, F: Real> NoiseAccumulator<'a, F> {
    pub fn new(sampler: &'a RwmSampler<F>, t: F, probe_modes: &[usize]) -> Result<Self> {
        if !t.is_finite() || t <= F::zero() {
            return Err(CoreError::InvalidParameter(format!(
                "accumulation horizon must be positive, got {t}"
            )));
        }
        let n = sampler.params().active_modes();
        let n_f = F::of_usize(n);
        let ell = sampler.params().ell();
        let beta = beta_of_ell(ell);
        let pos = t * n_f;
        let full_steps = pos.floor().as_f64() as u64;
        let frac = pos - pos.floor();
        Ok(Self {
            sampler,
            probe_modes: probe_modes.to_vec(),
            w: vec![F::zero(); probe_modes.len()],
            prev: None,
            steps_seen: 0,
            full_steps,
            frac,
            scale: (n_f / (F::of(2.0) * ell * ell * beta)).sqrt(),
            centering: ell * ell * beta / n_f,
        })
    }

    /// Steps that must be fed before the accumulated value is complete.
    pub fn steps_needed(&self) -> u64 {
        self.full_steps + u64::from(self.frac > F::zero())
    }

    fn absorb(&mut self, next: &SpectralVector<F>) {
        let prev = self.prev.as_ref().expect("on_init must run first");
        self.steps_seen += 1;
        let weight = if self.steps_seen <= self.full_steps {
            F::one() / F::of_usize(self.sampler.params().active_modes()).sqrt()
        } else if self.steps_seen == self.full_steps + 1 && self.frac > F::zero() {
            self.frac / F::of_usize(self.sampler.params().active_modes()).sqrt()
        } else {
            return;
        };
        let drift = self.sampler.drift_field(prev);
        for (k, &j) in self.probe_modes.iter().enumerate() {
            let gamma = self.scale
                * (next.coord(j) - prev.coord(j) + self.centering * drift.coord(j));
            self.w[k] += weight * gamma;
        }
    }

    /// The accumulated per-probe-mode values.
    pub fn finish(self) -> Result<Vec<F>> {
        if self.steps_seen < self.steps_needed() {
            return Err(CoreError::ShortTrajectory {
                need: self.steps_needed() as usize,
                got: self.steps_seen as usize,
            });
        }
        Ok(self.w)
    }
}

impl<F: Real> Recorder<F> for NoiseAccumulator<'_, F> {
    fn on_init(&mut self, state: &ChainState<F>) {
        self.prev = Some(state.x.clone());
    }

    fn on_step(&mut self, _record: &StepRecord<F>, state: &ChainState<F>) {
        self.absorb(&state.x);
        self.prev = Some(state.x.clone());
    }
}

/// Snapshot-based variant of the accumulation: `states` are consecutive
/// chain states starting at the initial condition.
pub fn accumulate_noise_path<F: Real>(
    sampler: &RwmSampler<F>,
    states: &[SpectralVector<F>],
    t: F,
    probe_modes: &[usize],
) -> Result<Vec<F>> {
    let mut acc = NoiseAccumulator::new(sampler, t, probe_modes)?;
    let needed = acc.steps_needed() as usize + 1;
    if states.len() < needed {
        return Err(CoreError::ShortTrajectory {
            need: needed,
            got: states.len(),
        });
    }
    acc.prev = Some(states[0].clone());
    for next in &states[1..needed] {
        acc.absorb(next);
        acc.prev = Some(next.clone());
    }
    acc.finish()
}

/// Per-mode Gaussianity of the accumulated noise.
#[derive(Clone, Debug)]
pub struct NoiseModeStat<F> {
    pub mode: usize,
    pub variance: F,
    pub variance_theory: F,
    /// One-sample KS of `W_j / (lambda_j sqrt t)` against the standard normal.
    pub ks_normalized: F,
}

#[derive(Clone, Debug)]
pub struct NoiseCorrelation<F> {
    pub mode_a: usize,
    pub mode_b: usize,
    pub correlation: F,
    /// Four standard errors of a null correlation at this replica count.
    pub four_se: F,
}

#[derive(Clone, Debug)]
pub struct NoiseReport<F> {
    pub n: usize,
    pub t: F,
    pub replicas: usize,
    pub modes: Vec<NoiseModeStat<F>>,
    pub correlations: Vec<NoiseCorrelation<F>>,
}

/// Gaussianity report over per-replica accumulated noise vectors
/// (`w_samples[r][k]` is probe mode `probe_modes[k]` of replica `r`).
pub fn noise_gaussianity_report<F: Real>(
    sampler: &RwmSampler<F>,
    w_samples: &[Vec<F>],
    t: F,
    probe_modes: &[usize],
) -> Result<NoiseReport<F>> {
    let replicas = w_samples.len();
    if replicas < 2 {
        return Err(CoreError::TooFewSamples {
            need: 2,
            got: replicas,
        });
    }
    let r_f = F::of_usize(replicas);
    let mut modes = Vec::with_capacity(probe_modes.len());
    let mut columns: Vec<Vec<F>> = vec![Vec::with_capacity(replicas); probe_modes.len()];
    for w in w_samples {
        for (k, &v) in w.iter().enumerate() {
            columns[k].push(v);
        }
    }
    for (k, &j) in probe_modes.iter().enumerate() {
        let lam = sampler.lambda(j);
        let theory = t * lam * lam;
        let mean = columns[k].iter().copied().sum::<F>() / r_f;
        let var = columns[k]
            .iter()
            .map(|&v| (v - mean) * (v - mean))
            .sum::<F>()
            / (r_f - F::one());
        let sd = (t.sqrt() * lam).max(F::of(f64::MIN_POSITIVE));
        let normalized: Vec<F> = columns[k].iter().map(|&v| v / sd).collect();
        let ks = empirical_ks_vs_cdf(&normalized, normal_cdf)?;
        modes.push(NoiseModeStat {
            mode: j,
            variance: var,
            variance_theory: theory,
            ks_normalized: ks,
        });
    }
    let mut correlations = Vec::new();
    let four_se = F::of(4.0) / r_f.sqrt();
    for ka in 0..probe_modes.len() {
        for kb in ka + 1..probe_modes.len() {
            let ma = columns[ka].iter().copied().sum::<F>() / r_f;
            let mb = columns[kb].iter().copied().sum::<F>() / r_f;
            let mut cab = F::zero();
            let mut va = F::zero();
            let mut vb = F::zero();
            for r in 0..replicas {
                let da = columns[ka][r] - ma;
                let db = columns[kb][r] - mb;
                cab += da * db;
                va += da * da;
                vb += db * db;
            }
            correlations.push(NoiseCorrelation {
                mode_a: probe_modes[ka],
                mode_b: probe_modes[kb],
                correlation: cab / (va * vb).sqrt(),
                four_se,
            });
        }
    }
    Ok(NoiseReport {
        n: sampler.params().active_modes(),
        t,
        replicas,
        modes,
        correlations,
    })
}

/// Runs one stationary chain and returns the accumulated noise vector on the
/// probe modes. Exact stationary start for conjugate targets.
pub fn noise_w_sample<F: Real, R: Rng + ?Sized>(
    sampler: &RwmSampler<F>,
    t: F,
    probe_modes: &[usize],
    rng: &mut R,
) -> Result<Vec<F>> {
    let mut acc = NoiseAccumulator::new(sampler, t, probe_modes)?;
    let steps = acc.steps_needed();
    let (init, _) = sampler.stationary_init(rng, None)?;
    sampler.run(init, steps, rng, &mut acc);
    acc.finish()
}

/// Number of endpoint functionals compared between chain and diffusion.
pub const WEAK_FUNCTIONAL_COUNT: usize = 4;
/// Names for the endpoint functionals, in report order.
pub const WEAK_FUNCTIONAL_NAMES: [&str; WEAK_FUNCTIONAL_COUNT] =
    ["mode1_s", "mode2_s", "mode5_s", "p16_norm_sq_s"];

/// Endpoint functionals: the `s`-weighted coordinates of modes 1, 2, 5 and
/// the squared `s`-norm of the first sixteen modes.
pub fn weak_functionals<F: Real>(
    z: &SpectralVector<F>,
    s: SobolevIndex<F>,
) -> [F; WEAK_FUNCTIONAL_COUNT] {
    let coord_s = |j: usize| {
        // <z, basis_j>_s with the s-orthonormal basis: j^s z_j
        F::of_usize(j).powf(s.r()) * z.coord(j)
    };
    let mut p16 = F::zero();
    for j in 1..=16usize {
        let c = z.coord(j);
        p16 += s.weight(j) * c * c;
    }
    [coord_s(1), coord_s(2), coord_s(5), p16]
}

/// Runs one stationary chain to time `t` (in interpolant time, `n` steps per
/// unit) and evaluates the endpoint functionals at the interpolated state.
pub fn weak_chain_functionals<F: Real, R: Rng + ?Sized>(
    sampler: &RwmSampler<F>,
    t: F,
    rng: &mut R,
) -> Result<[F; WEAK_FUNCTIONAL_COUNT]> {
    if !t.is_finite() || t < F::zero() {
        return Err(CoreError::InvalidParameter(format!(
            "endpoint time must be nonnegative, got {t}"
        )));
    }
    let n = sampler.params().active_modes();
    let pos = t * F::of_usize(n);
    let full = pos.floor().as_f64() as u64;
    let frac = pos - pos.floor();
    let (init, _) = sampler.stationary_init(rng, None)?;
    let mut state = init;
    for _ in 0..full {
        state = sampler.step(&state, rng).0;
    }
    let z = if frac > F::zero() {
        let before = state.x.clone();
        let after = sampler.step(&state, rng).0.x;
        let coords = before
            .coords()
            .iter()
            .zip(after.coords())
            .map(|(&a, &b)| (F::one() - frac) * a + frac * b)
            .collect();
        SpectralVector::new(coords)?
    } else {
        state.x
    };
    Ok(weak_functionals(&z, sampler.sobolev_index()))
}

/// Endpoint functionals of the exact stationary diffusion at time `t`.
pub fn weak_diffusion_functionals<F: Real, R: Rng + ?Sized>(
    sampler: &RwmSampler<F>,
    sc: &ScalingConstants<F>,
    t: F,
    rng: &mut R,
) -> Result<[F; WEAK_FUNCTIONAL_COUNT]> {
    let z = sample_stationary_diffusion(
        sampler.potential(),
        sampler.covariance(),
        sc,
        t,
        sampler.params().active_modes(),
        sampler.n_store(),
        rng,
    )?;
    Ok(weak_functionals(&z, sampler.sobolev_index()))
}

/// One row of the endpoint-comparison table.
#[derive(Clone, Debug)]
pub struct WeakConvergenceRow<F> {
    pub n: usize,
    pub functional: &'static str,
    pub ks: F,
    pub wasserstein1: F,
    pub n_samples: usize,
}

/// Two-sample distances per functional between chain and diffusion endpoint
/// samples collected at one truncation level.
pub fn weak_convergence_rows<F: Real>(
    n: usize,
    chain: &[[F; WEAK_FUNCTIONAL_COUNT]],
    diffusion: &[[F; WEAK_FUNCTIONAL_COUNT]],
) -> Result<Vec<WeakConvergenceRow<F>>> {
    let mut rows = Vec::with_capacity(WEAK_FUNCTIONAL_COUNT);
    for (k, name) in WEAK_FUNCTIONAL_NAMES.iter().enumerate() {
        let a: Vec<F> = chain.iter().map(|f| f[k]).collect();
        let b: Vec<F> = diffusion.iter().map(|f| f[k]).collect();
        rows.push(WeakConvergenceRow {
            n,
            functional: name,
            ks: empirical_ks_two_sample(&a, &b)?,
            wasserstein1: empirical_wasserstein1(&a, &b)?,
            n_samples: a.len().min(b.len()),
        });
    }
    Ok(rows)
}

/// Full endpoint-comparison sweep: for each truncation level, runs
/// `replicas` stationary chains to time `t`, samples the exact diffusion
/// equally many times, and reports two-sample distances per functional.
///
/// Stream addressing keyed on `(master_seed, (n << 32) | replica)` keeps
/// every replica independent and reproducible.
#[allow(clippy::too_many_arguments)]
pub fn weak_convergence_test<F: Real>(
    potential: &PotentialSpec<F>,
    covariance: &CovarianceSpec<F>,
    s: SobolevIndex<F>,
    ell: F,
    n_grid: &[usize],
    t: F,
    replicas: usize,
    n_store_margin: usize,
    master_seed: u64,
) -> Result<Vec<WeakConvergenceRow<F>>> {
    use crate::kernel::ProposalParams;
    let sc = ScalingConstants::from_ell(ell)?;
    let mut rows = Vec::new();
    for &n in n_grid {
        let sampler = RwmSampler::new(
            potential.clone(),
            covariance.clone(),
            s,
            ProposalParams::new(ell, n)?,
            n + n_store_margin,
        )?;
        let mut chain = Vec::with_capacity(replicas);
        let mut diff = Vec::with_capacity(replicas);
        for r in 0..replicas {
            let stream = ((n as u64) << 32) | r as u64;
            let mut chain_rng = derive_rng(master_seed, stream, StreamRole::Chain);
            chain.push(weak_chain_functionals(&sampler, t, &mut chain_rng)?);
            let mut diff_rng = derive_rng(master_seed, stream, StreamRole::Diffusion);
            diff.push(weak_diffusion_functionals(&sampler, &sc, t, &mut diff_rng)?);
        }
        rows.extend(weak_convergence_rows(n, &chain, &diff)?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ProposalParams;
    use proptest::prelude::*;

    fn sampler(
        potential: PotentialSpec<f64>,
        ell: f64,
        n: usize,
        n_store: usize,
    ) -> RwmSampler<f64> {
        RwmSampler::new(
            potential,
            CovarianceSpec::power_law(1.0, 1.0).unwrap(),
            SobolevIndex::new(0.25).unwrap(),
            ProposalParams::new(ell, n).unwrap(),
            n_store,
        )
        .unwrap()
    }

    #[test]
    fn drift_theory_matches_flat_potential_form() {
        let s = sampler(PotentialSpec::zero(), 1.0, 8, 8);
        let mut rng = derive_rng(1, 0, StreamRole::Probe);
        let (st, _) = s.stationary_init(&mut rng, None).unwrap();
        let mut inner = derive_rng(1, 0, StreamRole::InnerMc);
        let rep = estimate_one_step_drift(
            &st.x,
            &s,
            200,
            DriftEstimator::PairSampling,
            &mut inner,
        )
        .unwrap();
        let beta = beta_of_ell(1.0_f64);
        for j in 1..=8usize {
            let want = -beta * st.x.coord(j);
            assert!((rep.drift_theory[j - 1] - want).abs() < 1e-13);
        }
    }

    #[test]
    fn drift_at_origin_vanishes_by_symmetry() {
        let s = sampler(PotentialSpec::zero(), 1.0, 16, 16);
        let origin = SpectralVector::zeros(16).unwrap();
        let mut rng = derive_rng(2, 0, StreamRole::InnerMc);
        let rep = estimate_one_step_drift(
            &origin,
            &s,
            20_000,
            DriftEstimator::PairSampling,
            &mut rng,
        )
        .unwrap();
        for j in 1..=16usize {
            let est = rep.drift_est[j - 1];
            let se = rep.standard_errors[j - 1];
            assert!(est.abs() < 5.0 * se, "mode {j}: {est} vs se {se}");
        }
        assert!(rep.theory_norm_s == 0.0);
    }

    #[test]
    fn conditional_and_pair_estimators_agree() {
        let s = sampler(
            PotentialSpec::diagonal_quadratic(vec![1.0; 24]).unwrap(),
            1.2,
            24,
            24,
        );
        let mut rng = derive_rng(3, 0, StreamRole::Probe);
        let (st, _) = s.stationary_init(&mut rng, None).unwrap();
        let mut pair_rng = derive_rng(3, 1, StreamRole::InnerMc);
        let pair = estimate_one_step_drift(
            &st.x,
            &s,
            120_000,
            DriftEstimator::PairSampling,
            &mut pair_rng,
        )
        .unwrap();
        let mut cond_rng = derive_rng(3, 2, StreamRole::InnerMc);
        let cond = estimate_one_step_drift(
            &st.x,
            &s,
            4_000,
            DriftEstimator::Conditional,
            &mut cond_rng,
        )
        .unwrap();
        for j in 1..=24usize {
            let d = (pair.drift_est[j - 1] - cond.drift_est[j - 1]).abs();
            let se = (pair.standard_errors[j - 1].powi(2)
                + cond.standard_errors[j - 1].powi(2))
            .sqrt();
            assert!(d < 5.0 * se, "mode {j}: |{d}| vs se {se}");
        }
    }

    #[test]
    fn conditional_estimator_requires_quadratic_family() {
        let s = sampler(
            PotentialSpec::cosine_tilt(vec![0.4; 8]).unwrap(),
            1.0,
            8,
            8,
        );
        let x = SpectralVector::zeros(8).unwrap();
        let mut rng = derive_rng(4, 0, StreamRole::InnerMc);
        assert!(matches!(
            estimate_one_step_drift(&x, &s, 10, DriftEstimator::Conditional, &mut rng),
            Err(CoreError::UnsupportedPotential(_))
        ));
    }

    #[test]
    fn diffusion_probe_validation() {
        let s = sampler(PotentialSpec::zero(), 1.0, 8, 8);
        let x = SpectralVector::zeros(8).unwrap();
        let mut rng = derive_rng(5, 0, StreamRole::InnerMc);
        assert!(estimate_one_step_diffusion(&x, &s, 10, &[9], &[], &mut rng).is_err());
        assert!(estimate_one_step_diffusion(&x, &s, 0, &[1], &[], &mut rng).is_err());
        let rep =
            estimate_one_step_diffusion(&x, &s, 100, &[1, 2], &[(1, 2)], &mut rng).unwrap();
        assert_eq!(rep.diagonal.len(), 2);
        assert_eq!(rep.off_diagonal.len(), 1);
        assert_eq!(rep.off_diagonal[0].theory, 0.0);
    }

    #[test]
    fn zeta_statistic_chi_square_mean_flat_target() {
        let cov = CovarianceSpec::power_law(1.0, 1.0).unwrap();
        let pot = PotentialSpec::zero();
        let n = 256;
        let mut rng = derive_rng(6, 0, StreamRole::ChainInit);
        let reps = 10_000;
        let mut acc = 0.0;
        for _ in 0..reps {
            let x = crate::spectral::kl_sample(&mut rng, &cov, n).unwrap();
            acc += zeta_statistic(&x, &pot, &cov, n).unwrap();
        }
        let mean = acc / reps as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn zeta_statistic_variance_matches_chi_square() {
        let cov = CovarianceSpec::power_law(1.0, 1.0).unwrap();
        let pot = PotentialSpec::zero();
        let n = 64;
        let mut rng = derive_rng(7, 0, StreamRole::ChainInit);
        let reps = 20_000;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..reps {
            let x = crate::spectral::kl_sample(&mut rng, &cov, n).unwrap();
            let v = zeta_statistic(&x, &pot, &cov, n).unwrap();
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / reps as f64;
        let var = sumsq / reps as f64 - mean * mean;
        let want = 2.0 / n as f64;
        // SE of the variance of a chi-square-distributed mean
        let se = want * (2.0_f64 / reps as f64).sqrt() * 2.0;
        assert!((var - want).abs() < 6.0 * se, "var {var} want {want}");
    }

    #[test]
    fn q_moment_test_rejects_few_samples() {
        let qs = vec![0.0_f64; 99];
        assert!(matches!(
            q_moment_test(&qs, 1.0),
            Err(CoreError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn ks_basic_cases() {
        let a = vec![1.0_f64, 2.0, 3.0];
        assert_eq!(empirical_ks_two_sample(&a, &a).unwrap(), 0.0);
        let d = empirical_ks_two_sample(&[0.0_f64, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn ks_vs_cdf_null_band() {
        // 1e4 standard normals against Phi stay below the 99% band 1.63/sqrt(n).
        let mut rng = derive_rng(8, 0, StreamRole::Oracle);
        let xs: Vec<f64> = (0..10_000).map(|_| f64::standard_normal(&mut rng)).collect();
        let d = empirical_ks_vs_cdf(&xs, normal_cdf).unwrap();
        assert!(d < 1.63 / (10_000.0_f64).sqrt(), "KS {d}");
    }

    #[test]
    fn wasserstein_basic_cases() {
        let a = vec![3.0_f64, 1.0, 2.0];
        assert_eq!(empirical_wasserstein1(&a, &a).unwrap(), 0.0);
        assert_eq!(
            empirical_wasserstein1(&[0.0_f64, 0.0], &[1.0, 1.0]).unwrap(),
            1.0
        );
        // translation property
        let b: Vec<f64> = a.iter().map(|v| v + 2.5).collect();
        assert!((empirical_wasserstein1(&a, &b).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn wasserstein_unequal_lengths_trim() {
        // Identical distributions with different counts stay close to zero.
        let a: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let b: Vec<f64> = (0..500).map(|i| i as f64 / 500.0).collect();
        let d = empirical_wasserstein1(&a, &b).unwrap();
        assert!(d < 5e-3, "trimmed W1 {d}");
    }

    #[test]
    fn ks_wass_bound_self_null_and_slack_control() {
        let mut rng = derive_rng(9, 0, StreamRole::Oracle);
        let a: Vec<f64> = (0..20_000).map(|_| f64::standard_normal(&mut rng)).collect();
        let b: Vec<f64> = (0..20_000).map(|_| f64::standard_normal(&mut rng)).collect();
        let m = 1.0 / (2.0 * core::f64::consts::PI).sqrt();
        let rep = ks_wass_bound_check(&a, &b, m).unwrap();
        assert!(rep.bound_ok, "null case must satisfy the bound: {rep:?}");

        // Negative control of the slack policy: a point mass against the
        // normal keeps the true inequality comfortably true, so force a
        // failure by shifting the slack negative. This proves the checker
        // actually compares the two sides.
        let point = vec![0.0_f64; 4];
        let fail = ks_wass_bound_check_with_slack(&point, &b, m, -2.0).unwrap();
        assert!(!fail.bound_ok);
        let pass = ks_wass_bound_check(&point, &b, m).unwrap();
        assert!(pass.bound_ok, "true bound holds even adversarially: {pass:?}");
    }

    #[test]
    fn noise_accumulator_matches_snapshot_path() {
        let s = sampler(PotentialSpec::zero(), 1.0, 32, 32);
        let mut rng = derive_rng(10, 0, StreamRole::Chain);
        let (init, _) = s.stationary_init(&mut rng, None).unwrap();

        // snapshot run
        let mut snaps = crate::kernel::SnapshotRecorder::every_step();
        let t = 1.0;
        let mut acc = NoiseAccumulator::new(&s, t, &[1, 2, 5]).unwrap();
        let steps = acc.steps_needed();
        let summary = s.run(init, steps, &mut rng, &mut snaps);
        let _ = summary;
        let from_path =
            accumulate_noise_path(&s, &snaps.snapshots, t, &[1, 2, 5]).unwrap();

        // streaming over the same stored states
        acc.prev = Some(snaps.snapshots[0].clone());
        for st in &snaps.snapshots[1..] {
            acc.absorb(st);
            acc.prev = Some(st.clone());
        }
        let streamed = acc.finish().unwrap();
        for (a, b) in from_path.iter().zip(&streamed) {
            assert_eq!(a, b, "streaming and snapshot paths must agree bitwise");
        }
    }

    #[test]
    fn noise_accumulator_fractional_time() {
        let s = sampler(PotentialSpec::zero(), 1.0, 10, 10);
        let acc = NoiseAccumulator::new(&s, 0.55, &[1]).unwrap();
        assert_eq!(acc.steps_needed(), 6); // floor(5.5) = 5 full + 1 partial
        let acc = NoiseAccumulator::new(&s, 0.5, &[1]).unwrap();
        assert_eq!(acc.steps_needed(), 5);
        assert!(NoiseAccumulator::new(&s, 0.0, &[1]).is_err());
    }

    #[test]
    fn weak_functionals_shape() {
        let s_idx = SobolevIndex::new(0.25).unwrap();
        let z = SpectralVector::from_fn(20, |j| if j == 5 { 2.0 } else { 0.0 }).unwrap();
        let f = weak_functionals(&z, s_idx);
        assert_eq!(f[0], 0.0);
        assert!((f[2] - (5.0_f64).powf(0.25) * 2.0).abs() < 1e-14);
        assert!((f[3] - (5.0_f64).powf(0.5) * 4.0).abs() < 1e-13);
    }

    #[test]
    fn weak_rows_null_at_time_zero() {
        // Degenerate horizon: both endpoint laws are the same stationary
        // marginal, so distances sit inside the two-sample null band.
        let rows = weak_convergence_test(
            &PotentialSpec::diagonal_quadratic(vec![1.0; 16]).unwrap(),
            &CovarianceSpec::power_law(1.0, 1.0).unwrap(),
            SobolevIndex::new(0.25).unwrap(),
            1.0,
            &[16],
            0.0,
            800,
            16,
            77,
        )
        .unwrap();
        let band = 1.63 * (2.0 / 800.0_f64).sqrt() * 1.25;
        for row in rows {
            assert!(row.ks < band, "{}: ks {} outside null band", row.functional, row.ks);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn wasserstein_triangle_inequality(
            a in prop::collection::vec(-50.0_f64..50.0, 8..40),
            b in prop::collection::vec(-50.0_f64..50.0, 8..40),
            c in prop::collection::vec(-50.0_f64..50.0, 8..40),
        ) {
            // order-statistics W1 is a metric on equal-size samples; trim to
            // the common size to keep the coupling consistent
            let k = a.len().min(b.len()).min(c.len());
            let (a, b, c) = (&a[..k], &b[..k], &c[..k]);
            let dab = empirical_wasserstein1(a, b).unwrap();
            let dbc = empirical_wasserstein1(b, c).unwrap();
            let dac = empirical_wasserstein1(a, c).unwrap();
            prop_assert!(dac <= dab + dbc + 1e-12);
        }

        #[test]
        fn ks_invariant_under_monotone_transforms(
            a in prop::collection::vec(-10.0_f64..10.0, 4..40),
            b in prop::collection::vec(-10.0_f64..10.0, 4..40),
        ) {
            let t = |x: f64| 2.0 * x + x.powi(3); // strictly increasing
            let ta: Vec<f64> = a.iter().map(|&x| t(x)).collect();
            let tb: Vec<f64> = b.iter().map(|&x| t(x)).collect();
            let d0 = empirical_ks_two_sample(&a, &b).unwrap();
            let d1 = empirical_ks_two_sample(&ta, &tb).unwrap();
            prop_assert!((d0 - d1).abs() < 1e-12);
        }

        #[test]
        fn ks_bounded_and_symmetric(
            a in prop::collection::vec(-10.0_f64..10.0, 2..30),
            b in prop::collection::vec(-10.0_f64..10.0, 2..30),
        ) {
            let dab = empirical_ks_two_sample(&a, &b).unwrap();
            let dba = empirical_ks_two_sample(&b, &a).unwrap();
            prop_assert!((0.0..=1.0).contains(&dab));
            prop_assert!((dab - dba).abs() < 1e-15);
        }
    }
}
