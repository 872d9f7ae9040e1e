//! Statistical thresholds, loaded from the calibration file embedded at
//! compile time so runs cannot drift from the recorded values.

use serde::Deserialize;

/// Raw text of the calibration file (hashed into run manifests).
pub const CALIBRATION_TOML: &str = include_str!("../calibration.toml");

#[derive(Clone, Debug, Deserialize)]
pub struct Calibration {
    pub acceptance_rate: AcceptanceRateCal,
    pub q_distribution: QDistributionCal,
    pub ks_wass: KsWassCal,
    pub drift: DriftCal,
    pub diffusion: DiffusionCal,
    pub zeta: ZetaCal,
    pub weak_convergence: WeakConvergenceCal,
    pub noise: NoiseCal,
}

#[derive(Clone, Debug, Deserialize)]
pub struct AcceptanceRateCal {
    pub band: f64,
    pub steps: u64,
}

#[derive(Clone, Debug, Deserialize)]
pub struct QDistributionCal {
    pub mean_band_frac: f64,
    pub variance_band_frac: f64,
    pub moment_samples: u64,
    pub trend_samples: u64,
}

#[derive(Clone, Debug, Deserialize)]
pub struct KsWassCal {
    pub slack_multiplier: f64,
    pub kolmogorov_99: f64,
}

#[derive(Clone, Debug, Deserialize)]
pub struct DriftCal {
    pub probes: usize,
    pub relative_residual_max: f64,
    pub inner_mc: u64,
}

#[derive(Clone, Debug, Deserialize)]
pub struct DiffusionCal {
    pub diag_ratio_band: f64,
    pub offdiag_se_multiplier: f64,
    pub inner_mc: u64,
}

#[derive(Clone, Debug, Deserialize)]
pub struct ZetaCal {
    pub draws: u64,
    pub band_sqrt_n_factor: f64,
}

#[derive(Clone, Debug, Deserialize)]
pub struct WeakConvergenceCal {
    pub replicas: usize,
    pub ks_max_at_largest_n: f64,
}

#[derive(Clone, Debug, Deserialize)]
pub struct NoiseCal {
    pub replicas: usize,
    pub ks_max: f64,
    pub variance_band: f64,
    pub corr_se_multiplier: f64,
}

/// Parses the embedded calibration file.
pub fn calibration() -> Calibration {
    toml::from_str(CALIBRATION_TOML).expect("embedded calibration file must parse")
}
